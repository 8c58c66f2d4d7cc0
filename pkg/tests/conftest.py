"""Shared fixtures, hypothesis strategies, and Monte-Carlo tolerance helpers."""

from __future__ import annotations

import math

import hypothesis.strategies as st
import numpy as np
from hypothesis import HealthCheck, settings

from etz import SubjectRecord, TrialDataset

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# summary triple used across the suite: variances of the baseline, milestone,
# and change-from-baseline outcomes, which decompose into components
# (var_z, var_traj, var_e) = (53.802, 70.809, 10.778)
REFERENCE_MOMENTS = (64.58, 135.39, 92.37)
REFERENCE_COMPONENTS = (53.802, 70.809, 10.778)


# ---------------------------------------------------------------------------
# Gaussian Monte-Carlo standard errors (fourth-moment algebra).
# For jointly normal data with df nu, Cov(s_ab, s_cd) = (s_ac s_bd + s_ad s_bc)/nu.


def se_variance(var: float, nu: int) -> float:
    return var * math.sqrt(2.0 / nu)


def se_covariance(var_x: float, var_y: float, cov: float, nu: int) -> float:
    return math.sqrt((var_x * var_y + cov**2) / nu)


def se_components(var_baseline: float, var_milestone: float, cov_1m: float,
                  nu: int) -> tuple[float, float, float]:
    """Sampling SEs of (var_z, var_traj, var_e) from the pooled moments."""
    vb, vm, c = var_baseline, var_milestone, cov_1m
    se_z = math.sqrt((vb * vm + c**2) / nu)
    se_traj = math.sqrt((2 * vm**2 + 2 * vb**2 - 4 * c**2) / nu)
    se_e = math.sqrt((2 * vb**2 + vb * vm + c**2 - 4 * vb * c) / nu)
    return se_z, se_traj, se_e


# ---------------------------------------------------------------------------
# Hypothesis strategies.

_VALUES = st.floats(min_value=-1e9, max_value=1e9, allow_nan=False, width=64)
_MAYBE_VALUES = st.one_of(st.none(), _VALUES)


@st.composite
def trial_datasets(draw) -> TrialDataset:
    """Valid datasets: each arm gets >=2 complete subjects plus optional
    partial ones with arbitrary missing patterns."""
    m = draw(st.integers(min_value=2, max_value=4))
    arms = draw(st.sampled_from([("C",), ("C", "Rx"), ("C", "Rx", "Rx2")]))
    subjects = []
    idx = 0
    for arm in arms:
        n_complete = draw(st.integers(min_value=2, max_value=4))
        n_partial = draw(st.integers(min_value=0, max_value=2))
        for _ in range(n_complete):
            outcomes = tuple(draw(_VALUES) for _ in range(m))
            subjects.append(SubjectRecord(f"s{idx:03d}", arm, outcomes))
            idx += 1
        for _ in range(n_partial):
            outcomes = tuple(draw(_MAYBE_VALUES) for _ in range(m))
            subjects.append(SubjectRecord(f"s{idx:03d}", arm, outcomes))
            idx += 1
    return TrialDataset(tuple(subjects), m, "C")


component_triples = st.tuples(
    st.floats(min_value=0.0, max_value=1e6),
    st.floats(min_value=0.0, max_value=1e6),
    st.floats(min_value=0.0, max_value=1e6),
)


def two_arm_dataset(values_by_arm: dict[str, list[tuple]], control: str = "C",
                    m: int | None = None) -> TrialDataset:
    """Small hand-built dataset helper: arm -> list of outcome tuples."""
    subjects = []
    idx = 0
    for arm, rows in values_by_arm.items():
        for row in rows:
            subjects.append(SubjectRecord(f"s{idx:03d}", arm, tuple(row)))
            idx += 1
    if m is None:
        m = len(subjects[0].outcomes)
    return TrialDataset(tuple(subjects), m, control)


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
