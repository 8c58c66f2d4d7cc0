"""Command-line front end: ingestion -> moments -> decomposition -> reports.

Subcommands: decompose, cuq, simulate, attenuation, samplesize, diagnose.
Exit codes: 0 success, 2 validation error, 3 infeasible decomposition,
4 I/O error. Reports are JSON (sorted keys, so identical inputs give
bit-identical output); CSV is available for tabular outputs only. Every
report embeds the resolved configuration. A flat ``key = value`` config file
(keys mirror flag names, ``#`` comments) can supply any flag; explicit flags
win. ETZ_SEED in the environment is the seed fallback.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import cuq as cuq_mod
from . import decompose as dec_mod
from . import estimators as est_mod
from . import moments as mom_mod
from .errors import EtzError, InfeasibleDecompositionError, ValidationError
from .simulate import SimConfig, independence_diagnostic, simulate_counterfactual, to_factual
from .trial_data import LONG_HEADER, complete_cases, export_wide, parse_long, parse_wide


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValidationError("bad_parameter", f"expected comma-separated numbers, got {text!r}") from None


_COERCERS = {
    "float": float,
    "int": int,
    "str": str,
    "floatlist": _float_list,
}

# flag, value kind, help text (units stated where they apply)
_COMMON = [
    ("--output", "str", "output file path (default: standard output)"),
    ("--format", "str", "report format: json or csv (csv for tabular outputs only)"),
    ("--config", "str", "flat key = value configuration file mirroring flag names"),
]
_MOMENT_FLAGS = [
    ("--input", "str", "CSV file with trial data, wide or long layout (auto-detected)"),
    ("--control-label", "str", "arm label designating the control arm (required with --input)"),
    ("--var-baseline", "float", "variance of the visit-1 outcome (outcome units^2)"),
    ("--var-milestone", "float", "variance of the milestone-visit outcome (outcome units^2)"),
    ("--var-change", "float", "variance of change-from-baseline (outcome units^2)"),
    ("--cov-1m", "float", "covariance of visit-1 and milestone outcomes (outcome units^2); derived if omitted"),
]
_MODEL_FLAGS = [
    ("--slope-rx", "float", "outcome-on-intercept slope in the Rx arm (unitless)"),
    ("--slope-c", "float", "outcome-on-intercept slope in the control arm (unitless)"),
    ("--effect-rx", "float", "fixed Rx treatment effect (outcome units; illustrative default -2)"),
    ("--effect-c", "float", "fixed control treatment effect (outcome units; illustrative default 0)"),
    ("--model-intercept", "float", "outcome-model intercept (outcome units; default 0)"),
    ("--residual-var", "float", "outcome-model residual variance (outcome units^2)"),
]

_OPTIONS: dict[str, list[tuple[str, str, str]]] = {
    "decompose": _MOMENT_FLAGS + _COMMON,
    "cuq": _MOMENT_FLAGS
    + [
        ("--traj-cov", "float", "covariance of one subject's two potential trajectories (outcome units^2; default 0)"),
        ("--delta", "float", "effect size for implied sample sizes (outcome units)"),
        ("--alpha", "float", "two-sided type-I error rate (default 0.05)"),
        ("--power", "float", "target power (default 0.80)"),
        ("--var-z-grid", "floatlist", "comma-separated intercept variances for the entry-criterion table (outcome units^2)"),
    ]
    + _COMMON,
    "simulate": [
        ("--n", "int", "number of simulated subjects"),
        ("--seed", "int", "64-bit RNG seed (falls back to ETZ_SEED)"),
        ("--alpha-z", "float", "mean intercept E[Z] (outcome units; default 0)"),
        ("--mu-rx", "float", "mean Rx trajectory at the milestone (outcome units; illustrative default -2)"),
        ("--mu-c", "float", "mean control trajectory at the milestone (outcome units; illustrative default 0)"),
        ("--var-z", "float", "intercept variance (outcome units^2; illustrative default 53.802)"),
        ("--var-traj", "float", "trajectory variance (outcome units^2; illustrative default 70.809)"),
        ("--var-e", "float", "measurement-error variance (outcome units^2; illustrative default 10.778)"),
        ("--traj-corr", "float", "correlation of a subject's two trajectories, in [0, 1] (default 0)"),
        ("--cov-z-traj", "float", "intercept-trajectory covariance (outcome units^2; default 0)"),
        ("--var-e-biomarker", "float", "biomarker-score error variance (outcome units^2; default 0)"),
    ]
    + _COMMON,
    "attenuation": [
        ("--var-z", "float", "intercept variance (outcome units^2)"),
        ("--var-e-biomarker", "float", "biomarker-score error variance (outcome units^2; defaults to var_e from a decomposition)"),
    ]
    + _MOMENT_FLAGS
    + _MODEL_FLAGS
    + [
        ("--c-offset", "floatlist", "comma-separated offsets c; estimators are evaluated at E[Z] + c (outcome units; default 0)"),
        ("--alpha-z", "float", "mean intercept E[Z] (outcome units; default 0)"),
        ("--n", "int", "subjects per simulated replicate (default 500)"),
        ("--seed", "int", "64-bit RNG seed (falls back to ETZ_SEED)"),
        ("--replicates", "int", "Monte-Carlo replicates (>= 100); enables the simulation cross-check"),
    ]
    + _COMMON,
    "samplesize": [
        ("--delta", "float", "effect size to detect (outcome units)"),
        ("--sd", "float", "standard deviation of the per-unit comparison (outcome units)"),
        ("--alpha", "float", "two-sided type-I error rate (default 0.05)"),
        ("--power", "float", "target power (default 0.80)"),
        ("--traj-cov", "float", "trajectory covariance for the counterfactual comparison (outcome units^2; default 0)"),
    ]
    + _MOMENT_FLAGS
    + _COMMON,
    "diagnose": [
        ("--input", "str", "CSV file with trial data, wide or long layout (auto-detected)"),
        ("--control-label", "str", "arm label designating the control arm"),
    ]
    + _COMMON,
}

_HELP = {
    "decompose": "split visit moments into intercept/trajectory/error variances",
    "cuq": "factual vs counterfactual contrast variances and reduction fractions",
    "simulate": "generate a seeded factual trial dataset (wide CSV)",
    "attenuation": "attenuation factor and off-center estimator bias",
    "samplesize": "per-comparison sample size (two-sided normal approximation)",
    "diagnose": "R-squared of change-from-baseline on baseline, per-arm lines",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # one-line machine-parsable failure instead of usage dump
        raise ValidationError("usage", " ".join(message.split()))


def _dest(flag: str) -> str:
    return flag.lstrip("-").replace("-", "_")


def build_parser() -> _Parser:
    parser = _Parser(prog="etz", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, options in _OPTIONS.items():
        sp = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        for flag, kind, help_text in options:
            sp.add_argument(flag, dest=_dest(flag), type=_COERCERS[kind], default=None, help=help_text)
    return parser


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _apply_config(ns: argparse.Namespace, command: str) -> None:
    if ns.config is None:
        return
    known = {_dest(flag): kind for flag, kind, _ in _OPTIONS[command]}
    for line_no, raw in enumerate(_read_text(ns.config).splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(
                "bad_config", f"{ns.config}:{line_no}: expected 'key = value', got {line!r}"
            )
        key = key.strip().lower().replace("-", "_")
        if key == "config":
            raise ValidationError("bad_config", f"{ns.config}:{line_no}: config cannot nest")
        if key not in known:
            raise ValidationError(
                "unknown_config_key", f"{ns.config}:{line_no}: unknown key {key!r} for {command}"
            )
        if getattr(ns, key) is None:  # explicit flags win
            try:
                setattr(ns, key, _COERCERS[known[key]](value.strip()))
            except ValueError:
                raise ValidationError(
                    "bad_config", f"{ns.config}:{line_no}: cannot parse value for {key!r}"
                ) from None


def _resolve_seed(ns: argparse.Namespace) -> int:
    if ns.seed is not None:
        return ns.seed
    env = os.environ.get("ETZ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError("bad_parameter", f"ETZ_SEED={env!r} is not an integer") from None
    raise ValidationError("missing_parameter", "a seed is required (--seed, config, or ETZ_SEED)")


def _config_dict(ns: argparse.Namespace, command: str, **overrides) -> dict:
    cfg = {dest: getattr(ns, dest) for flag, _, _ in _OPTIONS[command] if (dest := _dest(flag)) != "config"}
    cfg.update(overrides)
    cfg["command"] = command
    return cfg


def _resolve_moments(ns: argparse.Namespace):
    """VisitMoments (plus means when data is available) from --input or flags."""
    if ns.input is not None:
        if ns.control_label is None:
            raise ValidationError("missing_parameter", "--control-label is required with --input")
        text = _read_text(ns.input)
        first = text.splitlines()[0].strip() if text.strip() else ""
        if [c.strip() for c in first.split(",")] == list(LONG_HEADER):
            data = parse_long(text, ns.control_label)
        else:
            data = parse_wide(text, ns.control_label)
        data, _ = complete_cases(data, {1, data.visit_count})
        return mom_mod.pooled_visit_moments(data), mom_mod.arm_visit_means(data)
    triple = (ns.var_baseline, ns.var_milestone, ns.var_change)
    if any(v is None for v in triple):
        raise ValidationError(
            "missing_parameter",
            "provide --input or all of --var-baseline/--var-milestone/--var-change",
        )
    return mom_mod.VisitMoments.from_summary(*triple, cov_1m=ns.cov_1m), None


def _emit_json(payload: dict, output: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _emit_csv(header: list[str], rows: list[list], output: str | None) -> None:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _require_json(ns: argparse.Namespace, command: str) -> None:
    if ns.format not in (None, "json"):
        raise ValidationError("bad_parameter", f"{command} emits JSON only")


def _sample_sizes(report: cuq_mod.CuqReport, delta: float, alpha: float, power: float) -> dict:
    out = {}
    for key, var in (
        ("n_factual_milestone", report.var_factual_milestone),
        ("n_factual_change", report.var_factual_change),
        ("n_counterfactual", report.var_counterfactual),
    ):
        out[key] = cuq_mod.sample_size(delta, math.sqrt(var), alpha, power) if var > 0 else None
    return out


def _cmd_decompose(ns: argparse.Namespace) -> int:
    _require_json(ns, "decompose")
    vm, means = _resolve_moments(ns)
    comps = dec_mod.decompose_independent(vm)
    payload = {
        "command": "decompose",
        "config": _config_dict(ns, "decompose"),
        "moments": mom_mod.summary_dict(vm, means),
        "report": dec_mod.report_dict(comps, vm),
    }
    _emit_json(payload, ns.output)
    return 0


def _cmd_cuq(ns: argparse.Namespace) -> int:
    vm, means = _resolve_moments(ns)
    comps = dec_mod.decompose_independent(vm)
    traj_cov = ns.traj_cov if ns.traj_cov is not None else 0.0
    report = cuq_mod.cuq_report(comps, traj_cov)
    rows = None
    if ns.var_z_grid is not None:
        rows = cuq_mod.entry_criterion_study(comps, ns.var_z_grid)
    if ns.format == "csv":
        if rows is None:
            raise ValidationError("bad_parameter", "csv output for cuq requires --var-z-grid")
        _emit_csv(["var_z", "sd_baseline", "sd_change"], [list(r) for r in rows], ns.output)
        return 0
    report_json = cuq_mod.report_dict(comps, report)
    if ns.delta is not None:
        alpha = ns.alpha if ns.alpha is not None else 0.05
        power = ns.power if ns.power is not None else 0.80
        report_json["sample_sizes"] = _sample_sizes(report, ns.delta, alpha, power)
    if rows is not None:
        report_json["entry_criterion"] = [
            {"var_z": r.var_z, "sd_baseline": r.sd_baseline, "sd_change": r.sd_change} for r in rows
        ]
    payload = {
        "command": "cuq",
        "config": _config_dict(ns, "cuq", traj_cov=traj_cov),
        "moments": mom_mod.summary_dict(vm, means),
        "components": dec_mod.report_dict(comps, vm),
        "report": report_json,
    }
    _emit_json(payload, ns.output)
    return 0


_SIM_DEFAULTS = {
    "alpha_z": 0.0,
    "mu_rx": -2.0,
    "mu_c": 0.0,
    "var_z": 53.802,
    "var_traj": 70.809,
    "var_e": 10.778,
    "traj_corr": 0.0,
    "cov_z_traj": 0.0,
    "var_e_biomarker": 0.0,
}


def _cmd_simulate(ns: argparse.Namespace) -> int:
    if ns.format not in (None, "csv"):
        raise ValidationError("bad_parameter", "simulate writes wide-format CSV only")
    if ns.n is None:
        raise ValidationError("missing_parameter", "--n is required")
    seed = _resolve_seed(ns)
    params = {k: getattr(ns, k) if getattr(ns, k) is not None else v for k, v in _SIM_DEFAULTS.items()}
    cfg = SimConfig(n_subjects=ns.n, seed=seed, **params)
    dataset = to_factual(simulate_counterfactual(cfg), cfg.seed)
    csv_text = export_wide(dataset)
    if ns.output is None:
        sys.stdout.write(csv_text)
        return 0
    Path(ns.output).write_text(csv_text, encoding="utf-8")
    sizes = dataset.arm_sizes()
    _emit_json(
        {
            "command": "simulate",
            "config": _config_dict(ns, "simulate", seed=seed, **params),
            "output": ns.output,
            "n_rx": sizes.get("Rx", 0),
            "n_c": sizes.get("C", 0),
        },
        None,
    )
    return 0


def _cmd_attenuation(ns: argparse.Namespace) -> int:
    var_z, var_eb = ns.var_z, ns.var_e_biomarker
    components = None
    if var_z is None or var_eb is None:
        have_moments = ns.input is not None or ns.var_baseline is not None
        if not have_moments:
            raise ValidationError(
                "missing_parameter",
                "provide --var-z and --var-e-biomarker, or moment inputs to derive them",
            )
        vm, _ = _resolve_moments(ns)
        components = dec_mod.decompose_independent(vm)
        if var_z is None:
            var_z = components.var_z
        if var_eb is None:
            var_eb = components.var_e  # biomarker = baseline: score error is the visit error
    lam = est_mod.attenuation_factor(var_z, var_eb)
    report: dict = {"attenuation": lam, "var_z": float(var_z), "var_e_biomarker": float(var_eb)}
    if components is not None:
        report["components"] = dec_mod.report_dict(components)

    model = None
    if ns.slope_rx is not None or ns.slope_c is not None:
        if ns.slope_rx is None or ns.slope_c is None:
            raise ValidationError("missing_parameter", "--slope-rx and --slope-c go together")
        model = est_mod.OutcomeModelParams(
            intercept=ns.model_intercept if ns.model_intercept is not None else 0.0,
            effect_rx=ns.effect_rx if ns.effect_rx is not None else -2.0,
            effect_c=ns.effect_c if ns.effect_c is not None else 0.0,
            slope_rx=ns.slope_rx,
            slope_c=ns.slope_c,
            residual_var=ns.residual_var if ns.residual_var is not None else 10.778,
        )
    c_grid = ns.c_offset if ns.c_offset is not None else [0.0]
    if model is not None:
        report["closed_form"] = [
            {
                "c_offset": c,
                "bias_control_side": est_mod.control_side_bias(model, lam, c),
                "bias_equipoise": est_mod.equipoise_bias(model, lam, c),
            }
            for c in c_grid
        ]
    if ns.replicates is not None:
        if model is None:
            raise ValidationError(
                "missing_parameter", "--replicates needs --slope-rx/--slope-c to define the outcome model"
            )
        seed = _resolve_seed(ns)
        cfg = SimConfig(
            n_subjects=ns.n if ns.n is not None else 500,
            var_z=var_z,
            var_traj=0.0,
            var_e=0.0,
            seed=seed,
            alpha_z=ns.alpha_z if ns.alpha_z is not None else 0.0,
            var_e_biomarker=var_eb,
        )
        if ns.format == "csv":
            estimates = est_mod.replicate_estimates(cfg, model, c_grid, ns.replicates)
            rows = [
                [c_grid[j], r, float(estimates[r, j, 0]), float(estimates[r, j, 1])]
                for j in range(len(c_grid))
                for r in range(ns.replicates)
            ]
            _emit_csv(["c_offset", "replicate", "control_side", "equipoise"], rows, ns.output)
            return 0
        report["mc"] = est_mod.report_dicts(est_mod.mc_bias_study(cfg, model, c_grid, ns.replicates))
        report["seed"] = seed
    elif ns.format == "csv":
        raise ValidationError("bad_parameter", "csv output for attenuation requires --replicates")
    payload = {"command": "attenuation", "config": _config_dict(ns, "attenuation"), "report": report}
    _emit_json(payload, ns.output)
    return 0


def _cmd_samplesize(ns: argparse.Namespace) -> int:
    _require_json(ns, "samplesize")
    if ns.delta is None:
        raise ValidationError("missing_parameter", "--delta is required")
    alpha = ns.alpha if ns.alpha is not None else 0.05
    power = ns.power if ns.power is not None else 0.80
    if ns.sd is not None:
        report: dict = {"n": cuq_mod.sample_size(ns.delta, ns.sd, alpha, power), "sd": ns.sd}
    else:
        vm, _ = _resolve_moments(ns)
        comps = dec_mod.decompose_independent(vm)
        traj_cov = ns.traj_cov if ns.traj_cov is not None else 0.0
        rep = cuq_mod.cuq_report(comps, traj_cov)
        report = _sample_sizes(rep, ns.delta, alpha, power)
        report["variances"] = {
            "var_factual_milestone": rep.var_factual_milestone,
            "var_factual_change": rep.var_factual_change,
            "var_counterfactual": rep.var_counterfactual,
        }
    report.update({"delta": ns.delta, "alpha": alpha, "power": power})
    payload = {"command": "samplesize", "config": _config_dict(ns, "samplesize"), "report": report}
    _emit_json(payload, ns.output)
    return 0


def _cmd_diagnose(ns: argparse.Namespace) -> int:
    _require_json(ns, "diagnose")
    if ns.input is None:
        raise ValidationError("missing_parameter", "--input is required")
    vm, _ = _resolve_moments(ns)  # validates the file and control label
    text = _read_text(ns.input)
    first = text.splitlines()[0].strip()
    if [c.strip() for c in first.split(",")] == list(LONG_HEADER):
        data = parse_long(text, ns.control_label)
    else:
        data = parse_wide(text, ns.control_label)
    cc, dropped = complete_cases(data, {1, data.visit_count})
    per_arm = {}
    for arm in sorted(cc.arm_labels):
        subs = cc.subjects_in(arm)
        pairs = [(s.outcomes[0], s.outcomes[-1] - s.outcomes[0]) for s in subs]
        fit = est_mod.fit_arm_regression(pairs)
        per_arm[arm] = {"intercept": fit.intercept, "slope": fit.slope, "n": len(subs)}
    payload = {
        "command": "diagnose",
        "config": _config_dict(ns, "diagnose"),
        "report": {
            "r_squared": independence_diagnostic(data),
            "per_arm": per_arm,
            "dropped": {arm: int(n) for arm, n in sorted(dropped.items())},
        },
    }
    _emit_json(payload, ns.output)
    return 0


_HANDLERS = {
    "decompose": _cmd_decompose,
    "cuq": _cmd_cuq,
    "simulate": _cmd_simulate,
    "attenuation": _cmd_attenuation,
    "samplesize": _cmd_samplesize,
    "diagnose": _cmd_diagnose,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise ValidationError("usage", "a subcommand is required (see --help)")
        if ns.format not in (None, "json", "csv"):
            raise ValidationError("bad_parameter", f"unknown format {ns.format!r}")
        _apply_config(ns, ns.command)
        return _HANDLERS[ns.command](ns)
    except InfeasibleDecompositionError as exc:
        print(f"etz: error [{exc.code}] {exc.message}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"etz: error [{exc.code}] {exc.message}", file=sys.stderr)
        return 2
    except EtzError as exc:
        print(f"etz: error [{exc.code}] {exc.message}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"etz: error [io_error] {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
