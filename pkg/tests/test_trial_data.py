import pytest
from conftest import trial_datasets, two_arm_dataset
from hypothesis import given

from etz import (
    SubjectRecord,
    TrialDataset,
    ValidationError,
    complete_cases,
    export_long,
    export_wide,
    parse_long,
    parse_wide,
)

WIDE = """subject_id,arm,y1,y2
a,C,1.0,2.0
b,C,3.0,4.0
c,Rx,5.0,6.0
d,Rx,7.0,8.0
"""

LONG = """subject_id,arm,visit,value
a,C,1,1.0
a,C,2,2.0
b,C,1,3.0
b,C,2,4.0
c,Rx,1,5.0
c,Rx,2,6.0
d,Rx,1,7.0
d,Rx,2,8.0
"""


def test_parse_wide_minimal():
    d = parse_wide("subject_id,arm,y1,y2\na,C,1,2\nb,C,3,4\n", "C")
    assert d.visit_count == 2
    assert len(d.subjects) == 2
    assert d.subjects[0] == SubjectRecord("a", "C", (1.0, 2.0))
    assert d.arm_labels == {"C"}


def test_parse_wide_missing_cell_retained():
    text = "subject_id,arm,y1,y2\na,C,1,2\nb,C,3,4\nc,C,5,\n"
    d = parse_wide(text, "C")
    assert len(d.subjects) == 3
    assert d.subjects[2].outcomes == (5.0, None)


def test_parse_wide_duplicate_subject_id():
    text = "subject_id,arm,y1,y2\na,C,1,2\na,C,3,4\nb,C,5,6\n"
    with pytest.raises(ValidationError) as exc:
        parse_wide(text, "C")
    assert exc.value.code == "duplicate_subject_id"
    assert "'a'" in exc.value.message


def test_parse_wide_non_numeric_cell_reports_position():
    text = "subject_id,arm,y1,y2\na,C,1,2\nb,C,oops,4\n"
    with pytest.raises(ValidationError) as exc:
        parse_wide(text, "C")
    assert exc.value.code == "non_numeric_cell"
    assert "line 3" in exc.value.message and "y1" in exc.value.message


def test_parse_wide_rejects_nonfinite():
    text = "subject_id,arm,y1,y2\na,C,1,2\nb,C,inf,4\n"
    with pytest.raises(ValidationError) as exc:
        parse_wide(text, "C")
    assert exc.value.code == "nonfinite_value"


@pytest.mark.parametrize(
    "header",
    ["id,arm,y1,y2", "subject_id,arm,y1", "subject_id,arm,y2,y1", "subject_id,arm"],
)
def test_parse_wide_malformed_header(header):
    with pytest.raises(ValidationError) as exc:
        parse_wide(header + "\na,C,1,2\n", "C")
    assert exc.value.code == "malformed_header"


def test_parse_wide_control_label_absent():
    with pytest.raises(ValidationError) as exc:
        parse_wide(WIDE, "placebo")
    assert exc.value.code == "control_label_missing"


def test_parse_long_matches_wide():
    assert parse_long(LONG, "C") == parse_wide(WIDE, "C")


def test_parse_long_missing_visit_row():
    text = "subject_id,arm,visit,value\na,C,1,1\na,C,2,2\nb,C,1,3\nb,C,2,4\nc,C,1,5\n"
    d = parse_long(text, "C")
    assert d.subjects[2].outcomes == (5.0, None)


def test_parse_long_duplicate_visit():
    text = "subject_id,arm,visit,value\na,C,1,1\na,C,1,2\n"
    with pytest.raises(ValidationError) as exc:
        parse_long(text, "C")
    assert exc.value.code == "duplicate_visit_row"


def test_parse_long_conflicting_arm():
    text = "subject_id,arm,visit,value\na,C,1,1\na,Rx,2,2\n"
    with pytest.raises(ValidationError) as exc:
        parse_long(text, "C")
    assert exc.value.code == "conflicting_arm"


def test_parse_long_visit_out_of_range():
    text = "subject_id,arm,visit,value\na,C,0,1\n"
    with pytest.raises(ValidationError) as exc:
        parse_long(text, "C")
    assert exc.value.code == "visit_out_of_range"


def test_dataset_requires_two_visits():
    with pytest.raises(ValidationError) as exc:
        TrialDataset((SubjectRecord("a", "C", (1.0,)),), 1, "C")
    assert exc.value.code == "too_few_visits"


def test_dataset_requires_two_complete_per_arm():
    subjects = (
        SubjectRecord("a", "C", (1.0, 2.0)),
        SubjectRecord("b", "C", (1.0, None)),
        SubjectRecord("c", "C", (2.0, 3.0)),
        SubjectRecord("d", "Rx", (1.0, 2.0)),
        SubjectRecord("e", "Rx", (1.0, None)),
    )
    with pytest.raises(ValidationError) as exc:
        TrialDataset(subjects, 2, "C")
    assert exc.value.code == "too_few_subjects"
    assert "'Rx'" in exc.value.message


def test_complete_cases_no_missing_is_identity():
    d = parse_wide(WIDE, "C")
    kept, dropped = complete_cases(d, {1, 2})
    assert kept == d
    assert dropped == {"C": 0, "Rx": 0}


def test_complete_cases_drops_missing_at_milestone():
    d = two_arm_dataset(
        {
            "C": [(1.0, 2.0), (3.0, 4.0), (5.0, None)],
            "Rx": [(1.0, 1.0), (2.0, 2.0)],
        }
    )
    kept, dropped = complete_cases(d, {1, 2})
    assert dropped == {"C": 1, "Rx": 0}
    assert all(s.complete_over((1, 2)) for s in kept.subjects)


def test_complete_cases_errors_when_arm_depleted():
    # visit 3 unobserved for most Rx subjects, but {1, m=3} completeness holds
    d = two_arm_dataset(
        {
            "C": [(1.0, 2.0, 3.0), (3.0, 4.0, 5.0)],
            "Rx": [(1.0, 1.0, 1.0), (2.0, None, 2.0), (4.0, None, 4.0)],
        }
    )
    with pytest.raises(ValidationError) as exc:
        complete_cases(d, {1, 2, 3})
    assert exc.value.code == "too_few_subjects"


def test_complete_cases_rejects_bad_visit():
    d = parse_wide(WIDE, "C")
    with pytest.raises(ValidationError) as exc:
        complete_cases(d, {1, 5})
    assert exc.value.code == "visit_out_of_range"


@given(trial_datasets())
def test_wide_round_trip(d):
    assert parse_wide(export_wide(d), d.control_label) == d


@given(trial_datasets())
def test_long_round_trip(d):
    assert parse_long(export_long(d), d.control_label) == d


@given(trial_datasets())
def test_complete_cases_idempotent(d):
    visits = {1, d.visit_count}
    once, dropped = complete_cases(d, visits)
    twice, dropped2 = complete_cases(once, visits)
    assert twice == once
    assert all(n == 0 for n in dropped2.values())


def test_export_wide_header_exact():
    d = parse_wide(WIDE, "C")
    assert export_wide(d).splitlines()[0] == "subject_id,arm,y1,y2"
    assert export_long(d).splitlines()[0] == "subject_id,arm,visit,value"
