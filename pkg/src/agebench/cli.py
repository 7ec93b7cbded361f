"""Command-line front end.

    agebench analyze|simulate|optimize|sweep (--spec FILE | --preset NAME)
             --out DIR [--seed N] [--no-plots]

Experiment files are JSON with a top-level ``"schema": 1`` marker; unknown
keys are rejected. Commands write tidy CSV (see :mod:`agebench.report`),
JSON results and PNG figures into the output directory.

Exit codes: 0 ok, 2 schema/input error, 3 numeric failure, 4 the
simulation-vs-analytics comparison exceeded its 3-sigma band (outputs are
still written), 5 solver non-convergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import allocate, mg11, report, simulate
from .errors import InsufficientDataError, NumericsError, SchemaError, SolverError
from .mm11 import aoi_violation_closed, paoi_violation_closed, roots
from .presets import PRESET_NAMES, expand_preset
from .service import ServiceKind, ServiceModel

_GRID_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "start": {"type": "number"},
                "stop": {"type": "number"},
                "num": {"type": "integer", "minimum": 2},
            },
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
    ]
}

_SERVICE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["exponential", "deterministic", "uniform", "custom"]},
        "mu": {"type": "number", "exclusiveMinimum": 0},
        "grid": {"type": "array",
                 "items": {"type": "array", "items": {"type": "number"},
                           "minItems": 2, "maxItems": 2},
                 "minItems": 2},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_SPEC_SCHEMA = {
    "type": "object",
    "properties": {
        "schema": {"const": 1},
        "system": {
            "type": "object",
            "properties": {
                "rates": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                          "minItems": 1},
                "service": _SERVICE_SCHEMA,
                "thresholds_aoi": {"type": "array",
                                   "items": {"type": "number", "exclusiveMinimum": 0}},
                "thresholds_paoi": {"type": "array",
                                    "items": {"type": "number", "exclusiveMinimum": 0}},
            },
            "required": ["rates", "service", "thresholds_aoi", "thresholds_paoi"],
            "additionalProperties": False,
        },
        "grid": _GRID_SCHEMA,
        "service_kinds": {
            "type": "array",
            "items": {"enum": ["exponential", "deterministic", "uniform", "custom"]},
            "minItems": 1,
        },
        "sim": {
            "type": "object",
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "target_delivered_updates": {"type": "integer", "minimum": 1},
                "sampled_moments": {"type": "integer", "minimum": 1},
                "warmup_fraction": {"type": "number", "minimum": 0,
                                    "exclusiveMaximum": 0.5},
                "batches": {"type": "integer", "minimum": 10},
            },
            "additionalProperties": False,
        },
        "problem": {
            "type": "object",
            "properties": {
                "metric": {"enum": ["AoI", "PAoI"]},
                "thresholds": {"type": "array",
                               "items": {"type": "number", "exclusiveMinimum": 0},
                               "minItems": 1},
                "total_rate": {"type": "number", "exclusiveMinimum": 0},
                "service_rate": {"type": "number", "exclusiveMinimum": 0},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "max_iterations": {"type": "integer", "minimum": 1},
            },
            "required": ["metric", "thresholds", "total_rate", "service_rate"],
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {
                "variable": {"enum": ["source_rate", "total_rate"]},
                "source": {"type": "integer", "minimum": 1},
                "grid": _GRID_SCHEMA,
            },
            "required": ["variable", "grid"],
            "additionalProperties": False,
        },
    },
    "required": ["schema"],
    "additionalProperties": False,
}


def _validate(doc: dict) -> dict:
    try:
        jsonschema.validate(doc, _SPEC_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"experiment spec rejected: {exc.message}") from exc
    return doc


def _load_runs(args):
    if args.preset:
        return [(label, _validate(doc)) for label, doc in expand_preset(args.preset)]
    try:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read experiment spec {args.spec}: {exc}") from exc
    return [(Path(args.spec).stem, _validate(doc))]


def _require(doc: dict, section: str) -> dict:
    if section not in doc:
        raise SchemaError(f"this command needs a {section!r} section in the experiment spec")
    return doc[section]


def _resolve_grid(g) -> np.ndarray:
    if isinstance(g, dict):
        return np.linspace(g["start"], g["stop"], g["num"])
    return np.asarray(g, dtype=float)


def _system_from(doc: dict, kind: str | None = None) -> mg11.SystemSpec:
    sec = _require(doc, "system")
    service = ServiceModel.from_json(sec["service"])
    if kind is not None and kind != service.kind.value:
        if kind == "custom":
            raise SchemaError("service_kinds may name 'custom' only when the system service is custom")
        builder = {"exponential": ServiceModel.exponential,
                   "deterministic": lambda mu: ServiceModel.deterministic(1.0 / mu),
                   "uniform": ServiceModel.uniform}[kind]
        service = builder(service.rate)
    try:
        return mg11.SystemSpec(rates=tuple(sec["rates"]), service=service,
                               thresholds_aoi=tuple(sec["thresholds_aoi"]),
                               thresholds_paoi=tuple(sec["thresholds_paoi"]))
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def _sim_config(doc: dict, seed_override) -> simulate.SimConfig:
    sec = dict(doc.get("sim", {}))
    if seed_override is not None:
        sec["seed"] = seed_override
    try:
        return simulate.SimConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc


def _problem_from(doc: dict) -> allocate.AllocationProblem:
    sec = dict(_require(doc, "problem"))
    sec["metric"] = allocate.Metric(sec["metric"])
    sec["thresholds"] = tuple(sec["thresholds"])
    try:
        return allocate.AllocationProblem(**sec)
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc)) from exc


def _general_violation(system: mg11.SystemSpec, metric: str, i: int, threshold: float) -> float:
    if threshold == 0.0:
        return 1.0
    if metric == "AoI":
        return mg11.aoi_violation(system, i, threshold)
    return mg11.paoi_violation(system, i, threshold)


def _closed_violation(system: mg11.SystemSpec, metric: str, i: int, threshold) :
    lam = system.total_rate
    mu = system.service_rate
    rp = roots(lam, mu, system.rate_of(i))
    if metric == "AoI":
        return aoi_violation_closed(rp, threshold)
    return paoi_violation_closed(rp, lam, mu, threshold)


# ---------------------------------------------------------------------------
# commands


def _cmd_analyze(label, doc, outdir, args):
    grid = _resolve_grid(doc.get("grid", {"start": 0.0, "stop": 20.0, "num": 21}))
    kinds = doc.get("service_kinds")
    if kinds is None:
        kinds = [_require(doc, "system")["service"]["kind"]]
    rows_by_kind = {}
    for kind in kinds:
        system = _system_from(doc, kind)
        rows = []
        for i in range(1, system.n_sources + 1):
            for metric in ("AoI", "PAoI"):
                for w in grid:
                    rows.append({"source": i, "metric": metric, "threshold": float(w),
                                 "value": _general_violation(system, metric, i, float(w)),
                                 "method": "general", "ci_halfwidth": None})
                if system.service.kind is ServiceKind.EXPONENTIAL:
                    closed = np.atleast_1d(_closed_violation(system, metric, i, grid))
                    rows.extend({"source": i, "metric": metric, "threshold": float(w),
                                 "value": float(v), "method": "closed",
                                 "ci_halfwidth": None}
                                for w, v in zip(grid, closed))
        report.write_rows(outdir / f"{label}_analyze_{kind}.csv", rows)
        rows_by_kind[kind] = rows
    if not args.no_plots:
        for metric in ("AoI", "PAoI"):
            report.violation_curves_figure(
                rows_by_kind, metric, outdir / f"{label}_analyze_{metric.lower()}.png",
                f"{metric} violation probability vs threshold")
    return 0


def _cmd_simulate(label, doc, outdir, args):
    system = _system_from(doc)
    cfg = _sim_config(doc, args.seed)
    result = simulate.run(system, cfg)

    rows = []
    mismatch = False
    from scipy import stats
    for i in range(1, system.n_sources + 1):
        for metric, emp, ci in (
            ("AoI", result.violation_aoi_time[i - 1], result.violation_aoi_time_ci[i - 1]),
            ("PAoI", result.violation_paoi[i - 1], result.violation_paoi_ci[i - 1]),
        ):
            thr = (system.thresholds_aoi if metric == "AoI" else system.thresholds_paoi)[i - 1]
            rows.append({"source": i, "metric": metric, "threshold": thr, "value": emp,
                         "method": "sim", "ci_halfwidth": ci})
            general = _general_violation(system, metric, i, thr)
            rows.append({"source": i, "metric": metric, "threshold": thr, "value": general,
                         "method": "general", "ci_halfwidth": None})
            analytic = general
            if system.service.kind is ServiceKind.EXPONENTIAL:
                analytic = float(_closed_violation(system, metric, i, thr))
                rows.append({"source": i, "metric": metric, "threshold": thr,
                             "value": analytic, "method": "closed", "ci_halfwidth": None})
            sigma = ci / stats.t.ppf(0.975, cfg.batches - 1)
            if abs(emp - analytic) > 3.0 * sigma:
                mismatch = True
                print(f"warning: source {i} {metric} simulated {emp:.5f} vs analytic "
                      f"{analytic:.5f} differs by more than 3 standard errors",
                      file=sys.stderr)

    report.write_rows(outdir / f"{label}_comparison.csv", rows)
    payload = {"system": {"rates": list(system.rates),
                          "service": system.service.to_json(),
                          "thresholds_aoi": list(system.thresholds_aoi),
                          "thresholds_paoi": list(system.thresholds_paoi)},
               "config": dataclasses.asdict(cfg),
               "result": result.to_json()}
    report.write_json(outdir / f"{label}_simulation.json", payload)
    if not args.no_plots:
        report.simulate_figure(rows, outdir / f"{label}_simulate.png",
                               "simulated vs analytic violation probabilities")
    return 4 if mismatch else 0


def _solve_both(problem):
    newton = allocate.solve_newton_barrier(problem)
    equal = allocate.solve_equalize(problem)
    out = newton.to_json()
    out["diagnostics"]["equalize_objective"] = equal.objective
    out["diagnostics"]["cross_method_gap"] = abs(newton.objective - equal.objective)
    return newton, equal, out


def _cmd_optimize(label, doc, outdir, args):
    problem = _problem_from(doc)
    newton, equal, payload = _solve_both(problem)
    report.write_json(outdir / f"{label}_allocation.json", payload)
    sweep = doc.get("sweep")
    if sweep and sweep["variable"] == "source_rate":
        _emit_rate_sweep(label, problem, sweep, newton, outdir, args)
    return 0


def _emit_rate_sweep(label, problem, sweep, solution, outdir, args):
    grid = _resolve_grid(sweep["grid"])
    source = sweep.get("source", 1)
    xs, values = allocate.sweep_allocation(problem, source, grid)
    rows = [{"source": 0, "metric": problem.metric.value, "threshold": float(x),
             "value": float(v), "method": "closed", "ci_halfwidth": None}
            for x, v in zip(xs, values)]
    report.write_rows(outdir / f"{label}_sweep_rate.csv", rows)
    if not args.no_plots:
        report.sweep_rate_figure(
            xs, values, (solution.rates[source - 1], solution.objective),
            outdir / f"{label}_sweep_rate.png",
            f"max {problem.metric.value} violation vs source-{source} rate")


def _cmd_sweep(label, doc, outdir, args):
    problem = _problem_from(doc)
    sweep = _require(doc, "sweep")
    if sweep["variable"] == "source_rate":
        newton, equal, payload = _solve_both(problem)
        report.write_json(outdir / f"{label}_allocation.json", payload)
        _emit_rate_sweep(label, problem, sweep, newton, outdir, args)
        return 0

    grid = _resolve_grid(sweep["grid"])
    optimal, equal_vals = [], []
    for lam in grid:
        scaled = dataclasses.replace(problem, total_rate=float(lam))
        optimal.append(allocate.solve_equalize(scaled).objective)
        equal_vals.append(allocate.max_violation(
            np.full(scaled.n_sources, lam / scaled.n_sources), scaled))
    for tag, vals in (("optimal", optimal), ("equal", equal_vals)):
        rows = [{"source": 0, "metric": problem.metric.value, "threshold": float(x),
                 "value": float(v), "method": "closed", "ci_halfwidth": None}
                for x, v in zip(grid, vals)]
        report.write_rows(outdir / f"{label}_sweep_total_{tag}.csv", rows)
    if not args.no_plots:
        report.sweep_total_figure(grid, optimal, equal_vals,
                                  outdir / f"{label}_sweep_total.png",
                                  f"max {problem.metric.value} violation vs total rate")
    return 0


_COMMANDS = {
    "analyze": _cmd_analyze,
    "simulate": _cmd_simulate,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agebench",
        description="Timeliness analysis, simulation and rate allocation for "
                    "multi-source bufferless preemptive status-update systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--spec", help="experiment spec JSON file")
        group.add_argument("--preset", choices=PRESET_NAMES,
                           help="built-in experiment preset")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the simulation seed")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    status = 0
    try:
        runs = _load_runs(args)
        for label, doc in runs:
            code = _COMMANDS[args.command](label, doc, outdir, args)
            status = max(status, code)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericsError, InsufficientDataError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 5
    return status


if __name__ == "__main__":
    sys.exit(main())
