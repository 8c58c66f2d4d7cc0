"""Variance-component decomposition of the visit moments.

Milestone-visit variability splits into three medically interpretable
components: the subject's pre-treatment intercept Z, the random trajectory of
their response to treatment, and visit-level measurement error E. Under two
assumptions -- equal measurement-error variance at visits 1 and m, and
independence of Z and the trajectory -- the split is identified from the
visit moments alone:

    var_z    = cov_1m
    var_traj = var_milestone - var_baseline
    var_e    = var_baseline - var_z

Without the independence assumption only the combinations exposed by
:func:`cov_aware_terms` are identified; the decomposition then shifts
variance between components (positive dependence inflates var_z and var_traj
and deflates var_e), which is why negative components are reported rather
than clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasibleDecompositionError, ValidationError
from .moments import VisitMoments


@dataclass(frozen=True)
class EtzComponents:
    """Intercept / trajectory / measurement-error variances (outcome units^2).

    ``assumed_cov_z_traj`` records the intercept-trajectory covariance the
    decomposition assumed (0 on the default path); it is carried so reports
    always surface the assumption.
    """

    var_z: float
    var_traj: float
    var_e: float
    assumed_cov_z_traj: float = 0.0


@dataclass(frozen=True)
class CovTermReport:
    """Assumption-light identified combinations.

    ``z_plus_covterm`` is Var(Z) + Cov(Z, Traj) and always equals cov_1m;
    ``traj_plus_2cov`` is Var(Traj) + 2 Cov(Z, Traj). Both are valid without
    assuming Z and the trajectory are independent (only equal measurement
    error variance across visits is needed for the second).
    """

    z_plus_covterm: float
    traj_plus_2cov: float


@dataclass(frozen=True)
class FeasibilityVerdict:
    passed: bool
    failing: tuple[str, ...]
    message: str

    def __bool__(self) -> bool:
        return self.passed


_DEPENDENCE_NOTE = (
    "a negative component indicates that measurement-error variance differs "
    "between visits 1 and m, or that the intercept and trajectory are dependent "
    "(positive dependence inflates var_z and var_traj and deflates var_e)"
)


def cov_aware_terms(m: VisitMoments) -> CovTermReport:
    """Identified combinations that do not use the independence assumption."""
    return CovTermReport(
        z_plus_covterm=(m.var_milestone + m.var_baseline - m.var_change) / 2.0,
        traj_plus_2cov=m.var_milestone - m.var_baseline,
    )


def default_tolerance(m: VisitMoments) -> float:
    return 1e-9 * abs(m.var_milestone)


def decompose_independent(m: VisitMoments, tol: float | None = None) -> EtzComponents:
    """Split the visit moments into intercept/trajectory/error variances.

    Assumes equal measurement-error variance at visits 1 and m and
    independence of intercept and trajectory. Components within ``-tol`` of
    zero are reported as-is (not clamped); any component below ``-tol``
    raises :class:`InfeasibleDecompositionError` carrying the offending
    values. ``tol`` defaults to 1e-9 relative to var_milestone; pass a larger
    value to absorb sampling noise in estimated moments.
    """
    if tol is None:
        tol = default_tolerance(m)
    if tol < 0:
        raise ValidationError("bad_parameter", f"tol must be >= 0, got {tol}")
    var_z = m.cov_1m
    comps = EtzComponents(
        var_z=var_z,
        var_traj=m.var_milestone - m.var_baseline,
        var_e=m.var_baseline - var_z,
    )
    verdict = feasibility_check(comps, tol)
    if not verdict.passed:
        raise InfeasibleDecompositionError("infeasible_component", verdict.message, comps)
    return comps


def feasibility_check(c: EtzComponents, tol: float) -> FeasibilityVerdict:
    """PASS when every component is >= -tol, else FAIL naming the offenders."""
    if tol < 0:
        raise ValidationError("bad_parameter", f"tol must be >= 0, got {tol}")
    failing = tuple(
        name
        for name, v in (("var_z", c.var_z), ("var_traj", c.var_traj), ("var_e", c.var_e))
        if v < -tol
    )
    if not failing:
        return FeasibilityVerdict(True, (), "PASS: all components >= -tol")
    detail = ", ".join(f"{name} = {getattr(c, name)}" for name in failing)
    return FeasibilityVerdict(False, failing, f"FAIL: {detail}; {_DEPENDENCE_NOTE}")


def reconstruct_moments(c: EtzComponents) -> VisitMoments:
    """Map components back to the visit moments they imply (exact algebra)."""
    cov_zt = c.assumed_cov_z_traj
    return VisitMoments.from_entries(
        var_baseline=c.var_z + c.var_e,
        var_milestone=c.var_z + c.var_traj + c.var_e + 2.0 * cov_zt,
        cov_1m=c.var_z + cov_zt,
    )


def report_dict(c: EtzComponents, m: VisitMoments | None = None,
                tol: float | None = None) -> dict:
    """JSON-ready decomposition report with identity residuals."""
    if tol is None:
        tol = default_tolerance(m) if m is not None else 0.0
    residuals = {}
    if m is not None:
        recon = reconstruct_moments(c)
        residuals = {
            "var_baseline": float(recon.var_baseline - m.var_baseline),
            "var_milestone": float(recon.var_milestone - m.var_milestone),
            "var_change": float(recon.var_change - m.var_change),
            "cov_1m": float(recon.cov_1m - m.cov_1m),
        }
    return {
        "var_z": float(c.var_z),
        "var_traj": float(c.var_traj),
        "var_e": float(c.var_e),
        "cov_term_assumed": float(c.assumed_cov_z_traj),
        "feasible": feasibility_check(c, tol).passed,
        "identities_residuals": residuals,
    }
