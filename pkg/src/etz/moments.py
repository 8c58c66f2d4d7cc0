"""Second-moment summaries of the visit-1 and milestone outcomes.

These are the three summary numbers the rest of the pipeline consumes --
Var(baseline), Var(milestone), Var(change-from-baseline) -- plus the
baseline/milestone covariance, which together satisfy

    var_change == var_baseline + var_milestone - 2 * cov_1m

by construction. Estimation centers every subject at its arm-by-visit sample
mean (removing arm and visit fixed effects) and pools across arms with
divisor N - (number of arms), the unbiased pooled estimator under equal
arm variances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ValidationError
from .trial_data import TrialDataset, complete_cases


@dataclass(frozen=True)
class VisitMoments:
    """Variances of visit-1 / milestone / change outcomes plus their covariance.

    ``var_baseline``, ``var_milestone``, ``var_change`` are in outcome
    units^2; ``n_used`` is the per-arm count of subjects that entered the
    estimate. Construct via :meth:`from_entries` or :meth:`from_summary`,
    which enforce the block identity linking the four numbers.
    """

    var_baseline: float
    var_milestone: float
    var_change: float
    cov_1m: float
    n_used: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def from_entries(cls, var_baseline: float, var_milestone: float, cov_1m: float,
                     n_used: Mapping[str, int] | None = None) -> "VisitMoments":
        """Build from the covariance-matrix entries; var_change is derived."""
        for name, v in (("var_baseline", var_baseline), ("var_milestone", var_milestone)):
            if not math.isfinite(v) or v < 0:
                raise ValidationError("negative_variance", f"{name} must be finite and >= 0, got {v}")
        if not math.isfinite(cov_1m):
            raise ValidationError("nonfinite_value", "cov_1m must be finite")
        var_change = var_baseline + var_milestone - 2.0 * cov_1m
        if var_change < 0.0:
            if var_change >= -1e-9 * max(var_baseline, var_milestone, 1.0):
                # cancellation noise on perfectly correlated data; pin the identity at 0
                cov_1m = (var_baseline + var_milestone) / 2.0
                var_change = 0.0
            else:
                raise ValidationError(
                    "negative_variance",
                    f"implied var_change = {var_change} is negative; "
                    "cov_1m is inconsistent with the variances",
                )
        return cls(float(var_baseline), float(var_milestone), float(var_change),
                   float(cov_1m), dict(n_used or {}))

    @classmethod
    def from_summary(cls, var_baseline: float, var_milestone: float, var_change: float,
                     cov_1m: float | None = None,
                     n_used: Mapping[str, int] | None = None) -> "VisitMoments":
        """Build from the three summary variances (covariance derived or checked)."""
        for name, v in (("var_baseline", var_baseline), ("var_milestone", var_milestone),
                        ("var_change", var_change)):
            if not math.isfinite(v) or v < 0:
                raise ValidationError("negative_variance", f"{name} must be finite and >= 0, got {v}")
        implied = (var_baseline + var_milestone - var_change) / 2.0
        if cov_1m is not None:
            scale = max(var_baseline, var_milestone, var_change, 1.0)
            if abs(cov_1m - implied) > 1e-9 * scale:
                raise ValidationError(
                    "inconsistent_moments",
                    f"cov_1m = {cov_1m} conflicts with the variance triple "
                    f"(implied covariance {implied})",
                )
        return cls.from_entries(var_baseline, var_milestone, implied, n_used)


def _complete_arrays(d: TrialDataset) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-arm (y1, ym) arrays over subjects complete at visits {1, m}."""
    cc, _ = complete_cases(d, {1, d.visit_count})
    arrays = {}
    for arm in sorted(cc.arm_labels):
        subs = cc.subjects_in(arm)
        y1 = np.array([s.outcomes[0] for s in subs], dtype=float)
        ym = np.array([s.outcomes[-1] for s in subs], dtype=float)
        if not (np.isfinite(y1).all() and np.isfinite(ym).all()):
            raise ValidationError("nonfinite_value", f"arm {arm!r} contains non-finite outcomes")
        arrays[arm] = (y1, ym)
    return arrays


def pooled_visit_moments(d: TrialDataset) -> VisitMoments:
    """Pooled within-arm visit-1 / milestone moments (divisor N - #arms).

    Subjects missing either visit are listwise-deleted; ``n_used`` records
    the per-arm counts actually used.
    """
    arrays = _complete_arrays(d)
    n_used = {arm: int(y1.size) for arm, (y1, _) in arrays.items()}
    nu = sum(n_used.values()) - len(arrays)
    if nu < 1:
        raise ValidationError("zero_df", "no degrees of freedom left after centering arm means")
    ssq1 = ssqm = sprod = 0.0
    for y1, ym in arrays.values():
        c1 = y1 - y1.mean()
        cm = ym - ym.mean()
        ssq1 += float(c1 @ c1)
        ssqm += float(cm @ cm)
        sprod += float(c1 @ cm)
    return VisitMoments.from_entries(ssq1 / nu, ssqm / nu, sprod / nu, n_used)


def per_arm_visit_moments(d: TrialDataset) -> dict[str, VisitMoments]:
    """Unpooled per-arm moments (divisor n_arm - 1), for diagnostics."""
    out = {}
    for arm, (y1, ym) in _complete_arrays(d).items():
        nu = y1.size - 1
        if nu < 1:
            raise ValidationError("zero_df", f"arm {arm!r} has a single subject")
        c1 = y1 - y1.mean()
        cm = ym - ym.mean()
        out[arm] = VisitMoments.from_entries(
            float(c1 @ c1) / nu, float(cm @ cm) / nu, float(c1 @ cm) / nu, {arm: int(y1.size)}
        )
    return out


@dataclass(frozen=True)
class ArmVisitMeans:
    """Cellwise (arm, visit) sample means plus change-from-baseline contrasts.

    ``contrasts`` maps each non-control arm to
    mean(change | arm) - mean(change | control), the efficacy point estimate
    for that arm.
    """

    means: Mapping[str, tuple[float, ...]]
    change_means: Mapping[str, float]
    contrasts: Mapping[str, float]
    control_label: str

    def mean(self, arm: str, visit: int) -> float:
        return self.means[arm][visit - 1]

    @property
    def tau_hat(self) -> float:
        """The efficacy point estimate; requires exactly one non-control arm."""
        if len(self.contrasts) != 1:
            raise ValidationError(
                "ambiguous_contrast",
                f"tau_hat needs exactly one non-control arm, found {sorted(self.contrasts)}",
            )
        return next(iter(self.contrasts.values()))


def arm_visit_means(d: TrialDataset) -> ArmVisitMeans:
    """Cellwise sample means per (arm, visit); errors on an empty cell."""
    means: dict[str, tuple[float, ...]] = {}
    change_means: dict[str, float] = {}
    for arm in sorted(d.arm_labels):
        subs = d.subjects_in(arm)
        cell_means = []
        for v in range(1, d.visit_count + 1):
            vals = [s.outcomes[v - 1] for s in subs if s.outcomes[v - 1] is not None]
            if not vals:
                raise ValidationError(
                    "empty_cell", f"arm {arm!r} has no observed values at visit {v}"
                )
            cell_means.append(float(np.mean(vals)))
        means[arm] = tuple(cell_means)
        changes = [
            s.outcomes[-1] - s.outcomes[0]
            for s in subs
            if s.complete_over((1, d.visit_count))
        ]
        change_means[arm] = float(np.mean(changes))
    contrasts = {
        arm: change_means[arm] - change_means[d.control_label]
        for arm in means
        if arm != d.control_label
    }
    return ArmVisitMeans(means, change_means, contrasts, d.control_label)


def summary_dict(m: VisitMoments, means: ArmVisitMeans | None = None) -> dict:
    """JSON-ready summary of the moment estimates."""
    tau: float | dict[str, float] | None = None
    if means is not None and means.contrasts:
        if len(means.contrasts) == 1:
            tau = float(next(iter(means.contrasts.values())))
        else:
            tau = {arm: float(v) for arm, v in sorted(means.contrasts.items())}
    return {
        "var_baseline": float(m.var_baseline),
        "var_milestone": float(m.var_milestone),
        "var_change": float(m.var_change),
        "cov_1m": float(m.cov_1m),
        "n_used": {arm: int(n) for arm, n in sorted(m.n_used.items())},
        "tau_hat": tau,
    }
