"""Seeded generative model for counterfactual before/after trial data.

Every subject gets one intercept Z shared by both potential treatment
courses, a pair of (possibly correlated) trajectories, independent visit
measurement errors, and a biomarker score B = Z + error. Potential outcomes:

    y1     = z + e1                (pre-treatment, shared by both arms)
    ym_rx  = z + traj_rx + em_rx
    ym_c   = z + traj_c  + em_c

All components are Gaussian. Draws come from counter-based Philox streams
keyed by SeedSequence([seed, replicate, role]), so replicates are
independent, order-insensitive, and bit-reproducible; within a replicate the
draw order is fixed (intercept/trajectory block, e1, em_rx, em_c, biomarker
error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import ValidationError
from .trial_data import SubjectRecord, TrialDataset

RNG_NAME = "numpy.random.Philox"

_ROLE_SIM = 0
_ROLE_ASSIGN = 1
_ROLE_OUTCOME = 2


def stream(seed: int, replicate: int = 0, role: int = _ROLE_SIM) -> np.random.Generator:
    """Philox generator for (seed, replicate, role); independent across keys."""
    if not 0 <= seed < 2**64:
        raise ValidationError("bad_parameter", f"seed must be a 64-bit unsigned integer, got {seed}")
    if replicate < 0:
        raise ValidationError("bad_parameter", f"replicate must be >= 0, got {replicate}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, replicate, role])))


@dataclass(frozen=True)
class SimConfig:
    """Generative parameters; means are in outcome units, variances in units^2.

    ``traj_corr`` is the correlation of one subject's two potential
    trajectories; ``cov_z_traj`` the intercept-trajectory covariance (same
    for both arms); ``var_e_biomarker`` the error variance of the biomarker
    score around Z. The default means are illustrative only.
    """

    n_subjects: int
    var_z: float
    var_traj: float
    var_e: float
    seed: int
    alpha_z: float = 0.0
    mu_rx: float = -2.0
    mu_c: float = 0.0
    traj_corr: float = 0.0
    cov_z_traj: float = 0.0
    var_e_biomarker: float = 0.0

    def __post_init__(self):
        if self.n_subjects < 1:
            raise ValidationError("bad_parameter", f"n_subjects must be >= 1, got {self.n_subjects}")
        for name in ("var_z", "var_traj", "var_e", "var_e_biomarker"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValidationError("bad_parameter", f"{name} must be finite and >= 0, got {v}")
        for name in ("alpha_z", "mu_rx", "mu_c", "cov_z_traj"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError("bad_parameter", f"{name} must be finite")
        if not 0.0 <= self.traj_corr <= 1.0:
            raise ValidationError("bad_parameter", f"traj_corr must be in [0, 1], got {self.traj_corr}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("bad_parameter", "seed must be a 64-bit unsigned integer")
        _component_factor(self)  # raises if the implied covariance is infeasible

    def component_covariance(self) -> np.ndarray:
        """Covariance of (z, traj_rx, traj_c)."""
        ct = self.traj_corr * self.var_traj
        cz = self.cov_z_traj
        return np.array(
            [
                [self.var_z, cz, cz],
                [cz, self.var_traj, ct],
                [cz, ct, self.var_traj],
            ]
        )


def _component_factor(cfg: SimConfig) -> np.ndarray:
    """Factor L with L L^T = component covariance; eigh-based so rank-deficient
    (zero-variance) configurations are handled."""
    cov = cfg.component_covariance()
    w, v = np.linalg.eigh(cov)
    tol = 1e-9 * max(float(np.trace(cov)), 1.0)
    if w.min() < -tol:
        raise ValidationError(
            "infeasible_covariance",
            "cov_z_traj/traj_corr imply a non-positive-semidefinite covariance "
            f"for (z, traj_rx, traj_c): min eigenvalue {w.min()}",
        )
    return v * np.sqrt(np.clip(w, 0.0, None))


class SubjectOutcomes(NamedTuple):
    z: float
    b: float
    y1: float
    ym_rx: float
    ym_c: float
    change_rx: float
    change_c: float


@dataclass(frozen=True)
class PotentialOutcomes:
    """Per-subject potential outcomes under both arms, as parallel arrays.

    Indexing yields a :class:`SubjectOutcomes` row, so the container behaves
    like a list of per-subject records while keeping array access cheap.
    """

    z: np.ndarray
    b: np.ndarray
    y1: np.ndarray
    ym_rx: np.ndarray
    ym_c: np.ndarray
    change_rx: np.ndarray
    change_c: np.ndarray

    def __len__(self) -> int:
        return int(self.z.shape[0])

    def __getitem__(self, i: int) -> SubjectOutcomes:
        return SubjectOutcomes(
            float(self.z[i]), float(self.b[i]), float(self.y1[i]),
            float(self.ym_rx[i]), float(self.ym_c[i]),
            float(self.change_rx[i]), float(self.change_c[i]),
        )

    def __iter__(self) -> Iterator[SubjectOutcomes]:
        return (self[i] for i in range(len(self)))


def simulate_counterfactual(cfg: SimConfig, replicate: int = 0) -> PotentialOutcomes:
    """Draw potential outcomes for every subject; deterministic given (seed, replicate)."""
    rng = stream(cfg.seed, replicate, _ROLE_SIM)
    n = cfg.n_subjects
    factor = _component_factor(cfg)
    core = rng.standard_normal((n, 3)) @ factor.T
    z = cfg.alpha_z + core[:, 0]
    traj_rx = cfg.mu_rx + core[:, 1]
    traj_c = cfg.mu_c + core[:, 2]
    e1 = math.sqrt(cfg.var_e) * rng.standard_normal(n)
    em_rx = math.sqrt(cfg.var_e) * rng.standard_normal(n)
    em_c = math.sqrt(cfg.var_e) * rng.standard_normal(n)
    be = math.sqrt(cfg.var_e_biomarker) * rng.standard_normal(n)
    y1 = z + e1
    ym_rx = z + traj_rx + em_rx
    ym_c = z + traj_c + em_c
    return PotentialOutcomes(
        z=z, b=z + be, y1=y1, ym_rx=ym_rx, ym_c=ym_c,
        change_rx=ym_rx - y1, change_c=ym_c - y1,
    )


def to_factual(sim: PotentialOutcomes, seed: int, replicate: int = 0) -> TrialDataset:
    """Randomize each subject 1:1 to an arm and keep only the assigned outcomes.

    Returns a two-visit dataset (visit 1 = baseline, visit 2 = milestone) with
    arms "Rx" and "C" and control label "C". Raises if the draw leaves an arm
    with fewer than 2 subjects (retry with another seed or a larger n).
    """
    if len(sim) == 0:
        raise ValidationError("empty_dataset", "no simulated subjects")
    rng = stream(seed, replicate, _ROLE_ASSIGN)
    assign = rng.integers(0, 2, size=len(sim))
    width = len(str(len(sim) - 1))
    subjects = tuple(
        SubjectRecord(
            f"s{i:0{width}d}",
            "Rx" if assign[i] else "C",
            (float(sim.y1[i]), float(sim.ym_rx[i] if assign[i] else sim.ym_c[i])),
        )
        for i in range(len(sim))
    )
    return TrialDataset(subjects, 2, "C")


def simulate_trial(cfg: SimConfig, replicate: int = 0) -> TrialDataset:
    """simulate_counterfactual followed by to_factual, sharing cfg.seed."""
    return to_factual(simulate_counterfactual(cfg, replicate), cfg.seed, replicate)


def independence_diagnostic(d: TrialDataset) -> float:
    """R-squared of change-from-baseline regressed on baseline, per-arm lines.

    Each arm gets its own intercept and slope; the returned value is the
    overall R^2 of the combined fit (1 - SSE/SST, SST about the grand mean of
    change). A value near 0 says baseline severity carries little information
    about response, supporting the independence assumption behind the
    component split. Note that baseline measurement error alone induces a
    negative slope, so the population value is var_e^2 /
    ((var_z + var_e) (var_traj + 2 var_e)) even with independent components.
    """
    from .trial_data import complete_cases

    cc, _ = complete_cases(d, {1, d.visit_count})
    sse = 0.0
    changes_all = []
    for arm in sorted(cc.arm_labels):
        subs = cc.subjects_in(arm)
        if len(subs) < 3:
            raise ValidationError(
                "too_few_subjects", f"arm {arm!r} needs >= 3 complete cases, has {len(subs)}"
            )
        y1 = np.array([s.outcomes[0] for s in subs])
        change = np.array([s.outcomes[-1] - s.outcomes[0] for s in subs])
        cx = y1 - y1.mean()
        sxx = float(cx @ cx)
        if sxx == 0.0:
            raise ValidationError(
                "zero_baseline_variance", f"arm {arm!r} has zero baseline variance"
            )
        slope = float(cx @ (change - change.mean())) / sxx
        resid = change - change.mean() - slope * cx
        sse += float(resid @ resid)
        changes_all.append(change)
    pooled = np.concatenate(changes_all)
    sst = float(((pooled - pooled.mean()) ** 2).sum())
    if sst == 0.0:
        return 0.0
    return max(0.0, min(1.0, 1.0 - sse / sst))
