"""Counterfactual uncertainty quantification and its sample-size consequences.

Three variances of the treatment-vs-control contrast are compared, all in
outcome units^2:

factual milestone   2 * (var_z + var_traj + var_e)
    two different subjects compared on the milestone outcome itself.
factual change      2 * var_traj + 4 * var_e
    two different subjects compared on change-from-baseline ("baselining").
counterfactual      2 * var_traj + 2 * var_e - 2 * traj_cov
    one subject counterfactually receiving both treatments
    ("self-controlling"); ``traj_cov`` is the covariance of that subject's
    two trajectories, 0 when the treatments act through unrelated mechanisms.

Reduction fractions all share the factual milestone variance as denominator,
so the baselining and self-controlling fractions add up to the total. The
gap between the factual-change and counterfactual variances is always
``2 * var_e + 2 * traj_cov``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import NamedTuple, Sequence

from .decompose import EtzComponents, feasibility_check
from .errors import ValidationError


@dataclass(frozen=True)
class CuqReport:
    """Contrast variances and reduction fractions for one component triple."""

    var_factual_milestone: float
    var_factual_change: float
    var_counterfactual: float
    traj_cov: float
    frac_baselining: float
    frac_selfcontrol: float
    frac_total: float


def _require_feasible(c: EtzComponents, where: str) -> None:
    if c.assumed_cov_z_traj != 0.0:
        raise ValidationError(
            "cov_z_traj_unsupported",
            f"{where} requires components with assumed_cov_z_traj = 0 "
            "(uncertainty quantification under intercept/trajectory dependence is not provided)",
        )
    scale = max(abs(c.var_z), abs(c.var_traj), abs(c.var_e), 1.0)
    verdict = feasibility_check(c, tol=1e-9 * scale)
    if not verdict.passed:
        raise ValidationError("infeasible_components", f"{where}: {verdict.message}")


def cuq_report(c: EtzComponents, traj_cov: float = 0.0) -> CuqReport:
    """Factual vs counterfactual contrast variances and reduction fractions.

    ``traj_cov`` (>= 0, <= var_traj) is the within-subject covariance of the
    two potential trajectories; 0 is the conservative default for treatments
    with unrelated mechanisms of action.
    """
    _require_feasible(c, "cuq_report")
    if not math.isfinite(traj_cov) or traj_cov < 0 or traj_cov > c.var_traj:
        raise ValidationError(
            "traj_cov_out_of_range",
            f"traj_cov must lie in [0, var_traj] = [0, {c.var_traj}], got {traj_cov}",
        )
    var_factual_milestone = 2.0 * (c.var_z + c.var_traj + c.var_e)
    var_factual_change = 2.0 * c.var_traj + 4.0 * c.var_e
    var_counterfactual = 2.0 * c.var_traj + 2.0 * c.var_e - 2.0 * traj_cov
    if var_factual_milestone > 0.0:
        frac_baselining = (var_factual_milestone - var_factual_change) / var_factual_milestone
        frac_selfcontrol = (var_factual_change - var_counterfactual) / var_factual_milestone
    else:
        frac_baselining = frac_selfcontrol = 0.0
    return CuqReport(
        var_factual_milestone=var_factual_milestone,
        var_factual_change=var_factual_change,
        var_counterfactual=var_counterfactual,
        traj_cov=float(traj_cov),
        frac_baselining=frac_baselining,
        frac_selfcontrol=frac_selfcontrol,
        frac_total=frac_baselining + frac_selfcontrol,
    )


def baselining_gain(c: EtzComponents) -> float:
    """Single-observation variance removed by switching to change-from-baseline.

    Equals var_z - var_e: positive iff baselining helps. A negative value
    means measurement noise dominates subject-to-subject spread, in which
    case the outcome measure itself is too noisy to be informative.
    """
    _require_feasible(c, "baselining_gain")
    return c.var_z - c.var_e


def sample_size(delta: float, sd: float, alpha: float, power: float) -> int:
    """Smallest per-comparison n for a two-sided normal-approximation test.

    ``sd`` is the standard deviation of the chosen per-unit comparison
    (factual or counterfactual contrast, outcome units); ``delta`` the effect
    to detect (outcome units). Uses n = sd^2 (z_{1-alpha/2} + z_power)^2 / delta^2,
    rounded up.
    """
    if not (math.isfinite(delta) and delta > 0):
        raise ValidationError("bad_parameter", f"delta must be > 0, got {delta}")
    if not (math.isfinite(sd) and sd > 0):
        raise ValidationError("bad_parameter", f"sd must be > 0, got {sd}")
    if not 0 < alpha < 1:
        raise ValidationError("bad_parameter", f"alpha must be in (0, 1), got {alpha}")
    if not 0 < power < 1:
        raise ValidationError("bad_parameter", f"power must be in (0, 1), got {power}")
    z = NormalDist().inv_cdf
    raw = (sd * (z(1.0 - alpha / 2.0) + z(power)) / delta) ** 2
    return max(1, math.ceil(raw - 1e-9))


class EntryCriterionRow(NamedTuple):
    var_z: float
    sd_baseline: float
    sd_change: float


def entry_criterion_study(c: EtzComponents, var_z_grid: Sequence[float]) -> list[EntryCriterionRow]:
    """SD(baseline) and SD(change) across hypothetical intercept variances.

    Narrowing the entry criterion shrinks var_z and hence SD(baseline), but
    SD(change) = sqrt(var_traj + 2 var_e) does not involve var_z at all, so
    the sd_change column is constant across the grid.
    """
    _require_feasible(c, "entry_criterion_study")
    sd_change = math.sqrt(max(c.var_traj, 0.0) + 2.0 * max(c.var_e, 0.0))
    rows = []
    for vz in var_z_grid:
        if not math.isfinite(vz) or vz < 0:
            raise ValidationError("bad_parameter", f"var_z grid values must be >= 0, got {vz}")
        rows.append(EntryCriterionRow(float(vz), math.sqrt(vz + max(c.var_e, 0.0)), sd_change))
    return rows


def report_dict(c: EtzComponents, r: CuqReport) -> dict:
    """JSON-ready report with pie-chart-ready fractions summing to 1."""
    gain = c.var_z - c.var_e
    return {
        "var_factual_milestone": float(r.var_factual_milestone),
        "var_factual_change": float(r.var_factual_change),
        "var_counterfactual": float(r.var_counterfactual),
        "traj_cov": float(r.traj_cov),
        "frac_baselining": float(r.frac_baselining),
        "frac_selfcontrol": float(r.frac_selfcontrol),
        "frac_total": float(r.frac_total),
        "pie": {
            "baselining": float(r.frac_baselining),
            "self_control": float(r.frac_selfcontrol),
            "residual": float(1.0 - (r.frac_baselining + r.frac_selfcontrol)),
        },
        "baselining_gain": float(gain),
        "baselining_beneficial": bool(gain > 0),
    }
