"""Counterfactual efficacy estimators and attenuation-bias quantification.

Outcomes are modeled as linear in the (unobservable) subject intercept Z with
arm-specific levels, either with a shared slope (parallel model, the
traditional-medicine case) or arm-specific slopes (non-parallel model, the
targeted-therapy case). In practice regressions are fitted on a biomarker
score B = Z + error instead of Z, which shrinks every fitted slope by the
attenuation factor

    lambda = var_z / (var_z + var_e_biomarker)

while leaving the fitted line's value at E[Z] unchanged. Consequently both
counterfactual estimators below are unbiased for the population efficacy but
biased when evaluated off-center at E[Z] + c:

    control-side bias  c * (slope_rx - lambda * slope_c)
    equipoise bias     (c/2) * ((slope_rx - lambda * slope_c)
                               + (lambda * slope_rx - slope_c))

The equipoise bias cancels exactly for the parallel model; the control-side
bias does not, which is why control-side prediction is inappropriate there.
``mc_bias_study`` cross-checks the closed forms against seeded simulated
replicates. No de-attenuation correction is applied anywhere; the corrected
slope estimate (fitted slope / lambda) is available as a diagnostic only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .simulate import SimConfig, _ROLE_OUTCOME, stream


@dataclass(frozen=True)
class LinearFit:
    """A fitted (or population) regression line."""

    intercept: float
    slope: float

    def predict(self, x: float) -> float:
        return self.intercept + self.slope * x

    def __iter__(self):
        yield self.intercept
        yield self.slope


@dataclass(frozen=True)
class OutcomeModelParams:
    """Arm-specific linear outcome model on the true intercept.

    mean(arm, z) = intercept + effect_arm + slope_arm * z, plus Gaussian
    residual with variance ``residual_var``. ``parallel=True`` asserts the
    shared-slope model and requires slope_rx == slope_c.
    """

    intercept: float
    effect_rx: float
    effect_c: float
    slope_rx: float
    slope_c: float
    residual_var: float
    parallel: bool = False

    def __post_init__(self):
        if not math.isfinite(self.residual_var) or self.residual_var < 0:
            raise ValidationError(
                "bad_parameter", f"residual_var must be >= 0, got {self.residual_var}"
            )
        if self.parallel and self.slope_rx != self.slope_c:
            raise ValidationError(
                "bad_parameter",
                f"parallel model requires equal slopes, got {self.slope_rx} and {self.slope_c}",
            )

    @classmethod
    def parallel_model(cls, intercept: float, effect_rx: float, effect_c: float,
                       slope: float, residual_var: float) -> "OutcomeModelParams":
        return cls(intercept, effect_rx, effect_c, slope, slope, residual_var, parallel=True)

    def rx_line(self) -> LinearFit:
        return LinearFit(self.intercept + self.effect_rx, self.slope_rx)

    def c_line(self) -> LinearFit:
        return LinearFit(self.intercept + self.effect_c, self.slope_c)

    def population_efficacy(self, e_z: float) -> float:
        """Expected Rx-minus-C outcome averaged over the population (at E[Z])."""
        return self.rx_line().predict(e_z) - self.c_line().predict(e_z)


@dataclass(frozen=True)
class BiasReport:
    """Closed-form and Monte-Carlo bias of both estimators at E[Z] + c_offset."""

    c_offset: float
    attenuation: float
    bias_control_side: float
    bias_equipoise: float
    mc_bias_control_side: float
    mc_se_control_side: float
    mc_bias_equipoise: float
    mc_se_equipoise: float
    replicates: int


def attenuation_factor(var_z: float, var_e_biomarker: float) -> float:
    """lambda = var_z / (var_z + var_e_biomarker); 1 iff the biomarker is error-free."""
    for name, v in (("var_z", var_z), ("var_e_biomarker", var_e_biomarker)):
        if not math.isfinite(v) or v < 0:
            raise ValidationError("bad_parameter", f"{name} must be finite and >= 0, got {v}")
    total = var_z + var_e_biomarker
    if total == 0:
        raise ValidationError("bad_parameter", "var_z and var_e_biomarker cannot both be zero")
    return var_z / total


def fit_arm_regression(pairs) -> LinearFit:
    """Ordinary least squares on (predictor, outcome) pairs; exact on collinear data."""
    a = np.asarray(pairs, dtype=float)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValidationError("bad_parameter", f"expected (n, 2) pairs, got shape {a.shape}")
    if a.shape[0] < 3:
        raise ValidationError("too_few_subjects", f"need >= 3 pairs, got {a.shape[0]}")
    if not np.isfinite(a).all():
        raise ValidationError("nonfinite_value", "pairs contain non-finite values")
    x, y = a[:, 0], a[:, 1]
    cx = x - x.mean()
    sxx = float(cx @ cx)
    if sxx == 0.0:
        raise ValidationError("degenerate_predictor", "predictor has zero variance")
    slope = float(cx @ (y - y.mean())) / sxx
    return LinearFit(float(y.mean() - slope * x.mean()), slope)


def population_fit_on_biomarker(model: OutcomeModelParams, arm: str,
                                attenuation: float, e_z: float) -> LinearFit:
    """Infinite-n limit of regressing an arm's outcome on the biomarker score.

    The slope shrinks by ``attenuation`` and the line pivots through the arm
    mean at E[Z], since E[B] = E[Z].
    """
    line = model.rx_line() if arm == "Rx" else model.c_line()
    slope = attenuation * line.slope
    return LinearFit(line.predict(e_z) - slope * e_z, slope)


def _require_fitted(fit, name: str) -> None:
    if fit is None or not hasattr(fit, "predict"):
        raise ValidationError("unfitted_model", f"{name} is not a fitted model")


def control_side_estimate(rx_model, c_model_on_b, eval_point: float) -> float:
    """Factual Rx mean minus counterfactual C prediction, both at ``eval_point``.

    ``rx_model`` is the factual-side line (the true-model Rx line at
    population scale, or a per-replicate fit on the true intercept in
    simulation studies); ``c_model_on_b`` is the C-arm line fitted on the
    biomarker score. At population scale this equals the population efficacy
    plus ``control_side_bias``.
    """
    _require_fitted(rx_model, "rx_model")
    _require_fitted(c_model_on_b, "c_model_on_b")
    return rx_model.predict(eval_point) - c_model_on_b.predict(eval_point)


def equipoise_estimate(rx_model, c_model, rx_model_on_b, c_model_on_b,
                       eval_point: float) -> float:
    """Average of the two factual-minus-counterfactual contrasts at ``eval_point``.

    Requires equally sized arms, so each direction gets weight 1/2. At
    population scale this equals the population efficacy plus
    ``equipoise_bias``; for the parallel model the bias terms cancel exactly.
    """
    for fit, name in ((rx_model, "rx_model"), (c_model, "c_model"),
                      (rx_model_on_b, "rx_model_on_b"), (c_model_on_b, "c_model_on_b")):
        _require_fitted(fit, name)
    return 0.5 * (rx_model.predict(eval_point) - c_model_on_b.predict(eval_point)) + \
        0.5 * (rx_model_on_b.predict(eval_point) - c_model.predict(eval_point))


def control_side_bias(model: OutcomeModelParams, attenuation: float, offset: float) -> float:
    """Closed-form control-side bias at E[Z] + offset (offset may be negative)."""
    return offset * (model.slope_rx - attenuation * model.slope_c)


def equipoise_bias(model: OutcomeModelParams, attenuation: float, offset: float) -> float:
    """Closed-form equipoise bias at E[Z] + offset; 0 for the parallel model."""
    return 0.5 * offset * (
        (model.slope_rx - attenuation * model.slope_c)
        + (attenuation * model.slope_rx - model.slope_c)
    )


def corrected_slope(fitted_slope: float, attenuation: float) -> float:
    """De-attenuated slope estimate (diagnostic only; no estimator uses it)."""
    if not 0 < attenuation <= 1:
        raise ValidationError("bad_parameter", f"attenuation must be in (0, 1], got {attenuation}")
    return fitted_slope / attenuation


def replicate_estimates(cfg: SimConfig, model: OutcomeModelParams, c_grid,
                        replicates: int) -> np.ndarray:
    """Per-replicate estimator values, shape (replicates, len(c_grid), 2).

    Last axis is (control_side, equipoise). Each replicate draws
    ``cfg.n_subjects`` subjects (Z from N(alpha_z, var_z), biomarker
    B = Z + error, outcomes from ``model``), splits them exactly in half
    between arms, fits per-arm regressions on B (and on Z for the
    factual side), and evaluates both estimators at E[Z] + c.

    Uses cfg fields n_subjects / alpha_z / var_z / var_e_biomarker / seed;
    the trajectory-model fields do not enter (``model`` supplies the outcome
    law). Replicate r draws from the stream keyed (seed, r), so results do
    not depend on execution order.
    """
    if replicates < 1:
        raise ValidationError("bad_parameter", f"replicates must be >= 1, got {replicates}")
    n = cfg.n_subjects
    if n % 2 != 0:
        raise ValidationError(
            "unequal_arms",
            f"n_subjects = {n} cannot be split into equally sized arms; "
            "the equipoise average assumes equal arm sizes, so unequal arms are rejected",
        )
    if n < 6:
        raise ValidationError("too_few_subjects", "need >= 3 subjects per arm")
    c_grid = [float(c) for c in c_grid]
    sd_z = math.sqrt(cfg.var_z)
    sd_b = math.sqrt(cfg.var_e_biomarker)
    sd_eps = math.sqrt(model.residual_var)
    out = np.empty((replicates, len(c_grid), 2))
    for r in range(replicates):
        rng = stream(cfg.seed, r, _ROLE_OUTCOME)
        z = cfg.alpha_z + sd_z * rng.standard_normal(n)
        b = z + sd_b * rng.standard_normal(n)
        y_rx = model.rx_line().predict(z) + sd_eps * rng.standard_normal(n)
        y_c = model.c_line().predict(z) + sd_eps * rng.standard_normal(n)
        perm = rng.permutation(n)
        rx, cc = perm[: n // 2], perm[n // 2:]
        rx_on_z = fit_arm_regression(np.column_stack([z[rx], y_rx[rx]]))
        rx_on_b = fit_arm_regression(np.column_stack([b[rx], y_rx[rx]]))
        c_on_z = fit_arm_regression(np.column_stack([z[cc], y_c[cc]]))
        c_on_b = fit_arm_regression(np.column_stack([b[cc], y_c[cc]]))
        for j, c in enumerate(c_grid):
            p = cfg.alpha_z + c
            out[r, j, 0] = control_side_estimate(rx_on_z, c_on_b, p)
            out[r, j, 1] = equipoise_estimate(rx_on_z, c_on_z, rx_on_b, c_on_b, p)
    return out


def mc_bias_study(cfg: SimConfig, model: OutcomeModelParams, c_grid,
                  replicates: int = 1000) -> list[BiasReport]:
    """Empirical vs closed-form estimator bias at each offset in ``c_grid``."""
    if replicates < 100:
        raise ValidationError(
            "bad_parameter", f"replicates must be >= 100 for stable bias estimates, got {replicates}"
        )
    lam = attenuation_factor(cfg.var_z, cfg.var_e_biomarker)
    estimates = replicate_estimates(cfg, model, c_grid, replicates)
    truth = model.population_efficacy(cfg.alpha_z)
    reports = []
    for j, c in enumerate(float(c) for c in c_grid):
        cs, eq = estimates[:, j, 0], estimates[:, j, 1]
        reports.append(
            BiasReport(
                c_offset=c,
                attenuation=lam,
                bias_control_side=control_side_bias(model, lam, c),
                bias_equipoise=equipoise_bias(model, lam, c),
                mc_bias_control_side=float(cs.mean() - truth),
                mc_se_control_side=float(cs.std(ddof=1) / math.sqrt(replicates)),
                mc_bias_equipoise=float(eq.mean() - truth),
                mc_se_equipoise=float(eq.std(ddof=1) / math.sqrt(replicates)),
                replicates=replicates,
            )
        )
    return reports


def report_dicts(reports: list[BiasReport]) -> list[dict]:
    """JSON-ready array of bias reports."""
    return [
        {
            "c_offset": r.c_offset,
            "attenuation": r.attenuation,
            "bias_control_side": r.bias_control_side,
            "bias_equipoise": r.bias_equipoise,
            "mc_bias_control_side": r.mc_bias_control_side,
            "mc_se_control_side": r.mc_se_control_side,
            "mc_bias_equipoise": r.mc_bias_equipoise,
            "mc_se_equipoise": r.mc_se_equipoise,
            "replicates": r.replicates,
        }
        for r in reports
    ]
