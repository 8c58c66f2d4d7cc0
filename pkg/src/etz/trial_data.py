"""Data model and CSV ingestion for before-and-after repeated-measures trial data.

A dataset is a rectangular subject-by-visit outcome table with an arm label
per subject and one arm designated as control. Visits are categorical labels
1..m (not times); visit 1 is the pre-treatment baseline and visit m the
milestone at which efficacy is assessed.

Two on-disk layouts are supported, both UTF-8 CSV with ``.`` as the decimal
separator:

wide
    header exactly ``subject_id,arm,y1,...,ym`` (m >= 2), one row per
    subject, empty cell = missing value.
long
    header exactly ``subject_id,arm,visit,value``, at most one row per
    (subject, visit); absent rows (or empty value cells) are missing values.

Missing data policy is complete-case: analyses listwise-delete subjects that
lack a value at any required visit, and the per-arm drop count is reported.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import ValidationError

LONG_HEADER = ("subject_id", "arm", "visit", "value")


@dataclass(frozen=True)
class SubjectRecord:
    """One subject: arm label plus the length-m outcome vector (None = missing)."""

    subject_id: str
    arm: str
    outcomes: tuple[float | None, ...]

    def __post_init__(self):
        object.__setattr__(self, "outcomes", tuple(self.outcomes))

    def complete_over(self, visits) -> bool:
        return all(self.outcomes[v - 1] is not None for v in visits)


@dataclass(frozen=True)
class TrialDataset:
    """Validated subject-by-visit outcome table with a designated control arm.

    Invariants enforced at construction: at least two visits, unique subject
    ids, outcome vectors of length ``visit_count``, finite values, the control
    label present in the data, and at least 2 subjects per arm with observed
    values at both visit 1 and visit m (variance estimation needs df >= 1).
    """

    subjects: tuple[SubjectRecord, ...]
    visit_count: int
    control_label: str

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if self.visit_count < 2:
            raise ValidationError(
                "too_few_visits",
                f"need at least 2 visits (baseline and milestone), got {self.visit_count}",
            )
        if not self.subjects:
            raise ValidationError("empty_dataset", "dataset contains no subjects")
        seen: set[str] = set()
        complete: dict[str, int] = {}
        for s in self.subjects:
            if not s.subject_id:
                raise ValidationError("invalid_subject_id", "empty subject_id")
            if not s.arm:
                raise ValidationError("invalid_arm", f"subject {s.subject_id!r} has an empty arm label")
            if s.subject_id in seen:
                raise ValidationError(
                    "duplicate_subject_id", f"duplicate subject_id {s.subject_id!r}"
                )
            seen.add(s.subject_id)
            if len(s.outcomes) != self.visit_count:
                raise ValidationError(
                    "outcome_length",
                    f"subject {s.subject_id!r} has {len(s.outcomes)} outcomes, expected {self.visit_count}",
                )
            for v, y in enumerate(s.outcomes, start=1):
                if y is not None and not math.isfinite(y):
                    raise ValidationError(
                        "nonfinite_value",
                        f"subject {s.subject_id!r} visit {v}: value must be finite",
                    )
            complete.setdefault(s.arm, 0)
            if s.complete_over((1, self.visit_count)):
                complete[s.arm] += 1
        if self.control_label not in complete:
            raise ValidationError(
                "control_label_missing",
                f"control label {self.control_label!r} does not occur in the data "
                f"(arms present: {sorted(complete)})",
            )
        for arm, n in sorted(complete.items()):
            if n < 2:
                raise ValidationError(
                    "too_few_subjects",
                    f"arm {arm!r} has {n} complete-case subject(s) over visits "
                    f"{{1, {self.visit_count}}}; need at least 2",
                )

    @property
    def m(self) -> int:
        return self.visit_count

    @property
    def arm_labels(self) -> frozenset[str]:
        return frozenset(s.arm for s in self.subjects)

    def subjects_in(self, arm: str) -> tuple[SubjectRecord, ...]:
        return tuple(s for s in self.subjects if s.arm == arm)

    def arm_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = {}
        for s in self.subjects:
            sizes[s.arm] = sizes.get(s.arm, 0) + 1
        return sizes


def _read_rows(csv_text: str) -> list[tuple[int, list[str]]]:
    # keep 1-based physical line numbers for error messages; skip blank lines
    rows = []
    for line_no, row in enumerate(csv.reader(io.StringIO(csv_text)), start=1):
        cells = [c.strip() for c in row]
        if not cells or all(c == "" for c in cells):
            continue
        rows.append((line_no, cells))
    return rows


def _parse_value(cell: str, line_no: int, column: str) -> float | None:
    if cell == "":
        return None
    try:
        value = float(cell)
    except ValueError:
        raise ValidationError(
            "non_numeric_cell",
            f"line {line_no}, column {column}: {cell!r} is not numeric",
        ) from None
    if not math.isfinite(value):
        raise ValidationError(
            "nonfinite_value", f"line {line_no}, column {column}: value must be finite"
        )
    return value


def parse_wide(csv_text: str, control_label: str) -> TrialDataset:
    """Parse wide-format CSV (header ``subject_id,arm,y1,...,ym``)."""
    rows = _read_rows(csv_text)
    if not rows:
        raise ValidationError("malformed_header", "empty input")
    header_line, header = rows[0]
    m = len(header) - 2
    if header[:2] != ["subject_id", "arm"] or m < 2 or header[2:] != [f"y{v}" for v in range(1, m + 1)]:
        raise ValidationError(
            "malformed_header",
            f"line {header_line}: expected header 'subject_id,arm,y1,...,ym' with m >= 2, "
            f"got {','.join(header)!r}",
        )
    subjects = []
    for line_no, cells in rows[1:]:
        if len(cells) != m + 2:
            raise ValidationError(
                "malformed_row",
                f"line {line_no}: expected {m + 2} fields, got {len(cells)}",
            )
        outcomes = tuple(
            _parse_value(cells[2 + j], line_no, f"y{j + 1}") for j in range(m)
        )
        subjects.append(SubjectRecord(cells[0], cells[1], outcomes))
    if not subjects:
        raise ValidationError("empty_dataset", "no data rows")
    return TrialDataset(tuple(subjects), m, control_label)


def parse_long(csv_text: str, control_label: str) -> TrialDataset:
    """Parse long-format CSV (header ``subject_id,arm,visit,value``).

    The visit count m is inferred as the largest visit index present. Missing
    values are represented by absent rows (or rows with an empty value cell).
    """
    rows = _read_rows(csv_text)
    if not rows:
        raise ValidationError("malformed_header", "empty input")
    header_line, header = rows[0]
    if header != list(LONG_HEADER):
        raise ValidationError(
            "malformed_header",
            f"line {header_line}: expected header {','.join(LONG_HEADER)!r}, got {','.join(header)!r}",
        )
    arms: dict[str, str] = {}
    values: dict[str, dict[int, float | None]] = {}
    order: list[str] = []
    max_visit = 0
    for line_no, cells in rows[1:]:
        if len(cells) != 4:
            raise ValidationError(
                "malformed_row", f"line {line_no}: expected 4 fields, got {len(cells)}"
            )
        sid, arm, visit_cell, value_cell = cells
        try:
            visit = int(visit_cell)
        except ValueError:
            raise ValidationError(
                "visit_out_of_range",
                f"line {line_no}: visit {visit_cell!r} is not a positive integer",
            ) from None
        if visit < 1:
            raise ValidationError(
                "visit_out_of_range", f"line {line_no}: visit index {visit} is out of range"
            )
        if sid not in arms:
            arms[sid] = arm
            values[sid] = {}
            order.append(sid)
        elif arms[sid] != arm:
            raise ValidationError(
                "conflicting_arm",
                f"line {line_no}: subject {sid!r} listed with arms {arms[sid]!r} and {arm!r}",
            )
        if visit in values[sid]:
            raise ValidationError(
                "duplicate_visit_row",
                f"line {line_no}: duplicate row for subject {sid!r}, visit {visit}",
            )
        values[sid][visit] = _parse_value(value_cell, line_no, "value")
        max_visit = max(max_visit, visit)
    if not order:
        raise ValidationError("empty_dataset", "no data rows")
    subjects = tuple(
        SubjectRecord(sid, arms[sid], tuple(values[sid].get(v) for v in range(1, max_visit + 1)))
        for sid in order
    )
    return TrialDataset(subjects, max_visit, control_label)


def complete_cases(d: TrialDataset, visits_needed) -> tuple[TrialDataset, dict[str, int]]:
    """Listwise-delete subjects missing any visit in ``visits_needed``.

    Returns the filtered dataset plus the number of dropped subjects per arm.
    Raises if fewer than 2 subjects would remain in any arm. Idempotent.
    """
    visits = sorted(set(visits_needed))
    if not visits:
        raise ValidationError("visit_out_of_range", "visits_needed must be non-empty")
    for v in visits:
        if not 1 <= v <= d.visit_count:
            raise ValidationError(
                "visit_out_of_range",
                f"visit {v} is out of range for a {d.visit_count}-visit dataset",
            )
    kept = tuple(s for s in d.subjects if s.complete_over(visits))
    before = d.arm_sizes()
    after: dict[str, int] = {arm: 0 for arm in before}
    for s in kept:
        after[s.arm] += 1
    dropped = {arm: before[arm] - after[arm] for arm in before}
    for arm, n in sorted(after.items()):
        if n < 2:
            raise ValidationError(
                "too_few_subjects",
                f"arm {arm!r} would have {n} subject(s) after dropping incomplete cases "
                f"over visits {visits}; need at least 2",
            )
    return TrialDataset(kept, d.visit_count, d.control_label), dropped


def _format_value(y: float | None) -> str:
    return "" if y is None else repr(float(y))


def export_wide(d: TrialDataset) -> str:
    """Serialize to wide-format CSV; exact round trip with parse_wide."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["subject_id", "arm"] + [f"y{v}" for v in range(1, d.visit_count + 1)])
    for s in d.subjects:
        writer.writerow([s.subject_id, s.arm] + [_format_value(y) for y in s.outcomes])
    return buf.getvalue()


def export_long(d: TrialDataset) -> str:
    """Serialize to long-format CSV (missing values become absent rows).

    A subject with no observed values at all gets a single empty-value row so
    that the subject and its arm survive the round trip.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LONG_HEADER)
    for s in d.subjects:
        if all(y is None for y in s.outcomes):
            writer.writerow([s.subject_id, s.arm, 1, ""])
            continue
        for v, y in enumerate(s.outcomes, start=1):
            if y is not None:
                writer.writerow([s.subject_id, s.arm, v, _format_value(y)])
    return buf.getvalue()
