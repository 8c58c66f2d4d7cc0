import numpy as np
import pytest
from conftest import se_components, se_variance, trial_datasets, two_arm_dataset
from hypothesis import given

from etz import (
    SimConfig,
    SubjectRecord,
    TrialDataset,
    ValidationError,
    VisitMoments,
    arm_visit_means,
    per_arm_visit_moments,
    pooled_visit_moments,
    simulate_trial,
)
from etz.moments import summary_dict


def test_pooled_hand_example():
    # per arm the centered (y1, ym) pairs are {(-1,-1), (1,1)}; pooled divisor
    # is N - #arms = 2, so var_baseline = 4/2 = 2
    d = two_arm_dataset(
        {
            "C": [(0.0, 0.0), (2.0, 2.0)],
            "Rx": [(10.0, 10.0), (12.0, 12.0)],
        }
    )
    vm = pooled_visit_moments(d)
    assert vm.var_baseline == 2.0
    assert vm.var_milestone == 2.0
    assert vm.cov_1m == 2.0
    assert vm.var_change == 0.0
    assert vm.n_used == {"C": 2, "Rx": 2}


def test_constant_within_arm_gives_zero_variances():
    d = two_arm_dataset(
        {
            "C": [(5.0, 7.0), (5.0, 7.0), (5.0, 7.0)],
            "Rx": [(1.0, 0.0), (1.0, 0.0)],
        }
    )
    vm = pooled_visit_moments(d)
    assert vm.var_baseline == 0.0
    assert vm.var_milestone == 0.0
    assert vm.var_change == 0.0
    assert vm.cov_1m == 0.0


@given(trial_datasets())
def test_block_identity_exact(d):
    vm = pooled_visit_moments(d)
    assert vm.var_change == vm.var_baseline + vm.var_milestone - 2.0 * vm.cov_1m


@given(trial_datasets())
def test_pooled_invariant_under_arm_shift(d):
    vm = pooled_visit_moments(d)
    arm = sorted(d.arm_labels)[0]
    shifted = TrialDataset(
        tuple(
            SubjectRecord(
                s.subject_id,
                s.arm,
                tuple(None if y is None else y + 1000.0 for y in s.outcomes),
            )
            if s.arm == arm
            else s
            for s in d.subjects
        ),
        d.visit_count,
        d.control_label,
    )
    vm2 = pooled_visit_moments(shifted)
    scale = max(abs(vm.var_baseline), abs(vm.var_milestone), 1.0)
    assert vm2.var_baseline == pytest.approx(vm.var_baseline, rel=1e-6, abs=1e-6 * scale)
    assert vm2.var_milestone == pytest.approx(vm.var_milestone, rel=1e-6, abs=1e-6 * scale)
    assert vm2.cov_1m == pytest.approx(vm.cov_1m, rel=1e-6, abs=1e-6 * scale)


def test_moments_consistency_against_generative_values():
    # components (50, 70, 10) imply moments (60, 130, 90) and cov 50
    cfg = SimConfig(n_subjects=10_000, var_z=50.0, var_traj=70.0, var_e=10.0, seed=20240501)
    vm = pooled_visit_moments(simulate_trial(cfg))
    nu = sum(vm.n_used.values()) - 2
    se_b = se_variance(60.0, nu)
    se_m = se_variance(130.0, nu)
    se_c = se_variance(90.0, nu)
    assert abs(vm.var_baseline - 60.0) < 3 * se_b
    assert abs(vm.var_milestone - 130.0) < 3 * se_m
    assert abs(vm.var_change - 90.0) < 3 * se_c


def test_tau_hat_converges_to_mean_contrast():
    cfg = SimConfig(
        n_subjects=10_000, var_z=50.0, var_traj=70.0, var_e=10.0, seed=7,
        mu_rx=-2.0, mu_c=0.0,
    )
    d = simulate_trial(cfg)
    means = arm_visit_means(d)
    # Var(tau_hat) ~ var_change * (1/n_rx + 1/n_c)
    sizes = d.arm_sizes()
    se = np.sqrt(90.0 * (1 / sizes["Rx"] + 1 / sizes["C"]))
    assert abs(means.tau_hat - (-2.0)) < 3 * se


def test_arm_visit_means_single_value_cells():
    d = two_arm_dataset(
        {
            "C": [(1.5, 2.5), (1.5, 2.5)],
            "Rx": [(3.0, 1.0), (3.0, 1.0)],
        }
    )
    means = arm_visit_means(d)
    assert means.mean("C", 1) == 1.5
    assert means.mean("Rx", 2) == 1.0
    assert means.contrasts == {"Rx": (1.0 - 3.0) - (2.5 - 1.5)}


def test_tau_hat_zero_on_constant_data():
    d = two_arm_dataset(
        {
            "C": [(4.0, 4.0), (4.0, 4.0)],
            "Rx": [(4.0, 4.0), (4.0, 4.0)],
        }
    )
    assert arm_visit_means(d).tau_hat == 0.0


def test_arm_visit_means_empty_cell_errors():
    d = two_arm_dataset(
        {
            "C": [(1.0, None, 2.0), (2.0, None, 3.0)],
            "Rx": [(1.0, 1.0, 1.0), (2.0, 2.0, 2.0)],
        }
    )
    with pytest.raises(ValidationError) as exc:
        arm_visit_means(d)
    assert exc.value.code == "empty_cell"


def test_tau_hat_ambiguous_with_three_arms():
    d = two_arm_dataset(
        {
            "C": [(1.0, 2.0), (2.0, 3.0)],
            "Rx": [(1.0, 2.0), (2.0, 3.0)],
            "Rx2": [(1.0, 2.0), (2.0, 3.0)],
        }
    )
    means = arm_visit_means(d)
    assert set(means.contrasts) == {"Rx", "Rx2"}
    with pytest.raises(ValidationError) as exc:
        means.tau_hat
    assert exc.value.code == "ambiguous_contrast"


def test_per_arm_moments_match_numpy():
    d = two_arm_dataset(
        {
            "C": [(1.0, 2.0), (2.0, 5.0), (4.0, 3.0)],
            "Rx": [(0.0, 1.0), (1.0, 0.0)],
        }
    )
    per_arm = per_arm_visit_moments(d)
    y1 = np.array([1.0, 2.0, 4.0])
    ym = np.array([2.0, 5.0, 3.0])
    assert per_arm["C"].var_baseline == pytest.approx(y1.var(ddof=1), rel=1e-12)
    assert per_arm["C"].var_milestone == pytest.approx(ym.var(ddof=1), rel=1e-12)
    assert per_arm["C"].cov_1m == pytest.approx(np.cov(y1, ym)[0, 1], rel=1e-12)


def test_from_summary_rejects_inconsistent_cov():
    with pytest.raises(ValidationError) as exc:
        VisitMoments.from_summary(64.58, 135.39, 92.37, cov_1m=10.0)
    assert exc.value.code == "inconsistent_moments"


def test_from_summary_rejects_negative_variance():
    with pytest.raises(ValidationError) as exc:
        VisitMoments.from_summary(-1.0, 135.39, 92.37)
    assert exc.value.code == "negative_variance"


def test_summary_dict_shape():
    d = two_arm_dataset(
        {
            "C": [(1.0, 2.0), (2.0, 3.0)],
            "Rx": [(1.0, 3.0), (2.0, 4.0)],
        }
    )
    out = summary_dict(pooled_visit_moments(d), arm_visit_means(d))
    assert set(out) == {"var_baseline", "var_milestone", "var_change", "cov_1m", "n_used", "tau_hat"}
    assert out["n_used"] == {"C": 2, "Rx": 2}
    assert out["tau_hat"] == pytest.approx(1.0)
