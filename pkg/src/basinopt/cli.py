"""Batch command-line interface.

Subcommands: solve (one model, one year), pareto (front trace), sweep
(parameter sensitivity re-solves), validate (scenario file check).

Exit codes are a stable contract: 0 success, 1 usage error, 2 validation
error, 3 solver or I/O failure. All file writes are atomic
(write-temp-then-rename), so a failed run leaves no partial outputs. The
default output directory comes from $BASINOPT_OUT when set; flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import pareto as pareto_mod
from .engine import SolveReport, solve_model
from .hydrology import derive_flows
from .scenario import (MONTHS, Scenario, ScenarioError, builtin_rajshahi,
                       canonical_year_label, load_scenario, scenario_digest,
                       validate)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

SOLVE_JSON_SCHEMA = "basinopt.solve/1"
SWEEP_PARAMS = ("t_pump", "canal_cap", "tef_fraction_high", "min_area_scale")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="basinopt",
                     description="Irrigation allocation models: solve, "
                                 "trade-off fronts, sensitivity sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--scenario", help="scenario TOML file or CSV bundle dir")
        src.add_argument("--builtin", choices=["rajshahi"],
                         help="use the bundled instance")
        p.add_argument("--clamp", choices=["none", "monthly", "per-crop"],
                       help="requirement clamp mode (default: scenario option)")

    p_solve = sub.add_parser("solve", help="solve model 1 or 2 on one year")
    common(p_solve)
    p_solve.add_argument("--year", required=True)
    p_solve.add_argument("--model", required=True)
    p_solve.add_argument("--out", help="output directory")
    p_solve.add_argument("--format", default="table,json",
                         help="comma list from: json,csv,table,plot")

    p_front = sub.add_parser("pareto", help="trace the trade-off front")
    common(p_front)
    p_front.add_argument("--year", required=True)
    p_front.add_argument("--weights", type=int, default=20)
    p_front.add_argument("--seed", type=int, default=0)
    p_front.add_argument("--jitter", action="store_true",
                         help="jitter the weight grid (seeded)")
    p_front.add_argument("--out", help="output directory")
    p_front.add_argument("--format", default="csv,json,plot")

    p_sweep = sub.add_parser("sweep", help="re-solve over a parameter range")
    common(p_sweep)
    p_sweep.add_argument("--year", required=True)
    p_sweep.add_argument("--model", required=True)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated parameter values")
    p_sweep.add_argument("--out", help="output directory")

    p_val = sub.add_parser("validate", help="validate a scenario")
    common(p_val)
    return parser


def _load(args) -> Scenario:
    if args.builtin:
        return builtin_rajshahi()
    return load_scenario(args.scenario)


def _clamp(args) -> str | None:
    if args.clamp is None:
        return None
    return args.clamp.replace("-", "_")


def _outdir(args) -> str:
    out = getattr(args, "out", None) or os.environ.get("BASINOPT_OUT") or "."
    if not os.path.isdir(out):
        raise IOError(f"output directory {out!r} does not exist")
    probe = os.path.join(out, ".basinopt_write_probe")
    try:
        with open(probe, "w") as fh:
            fh.write("")
        os.remove(probe)
    except OSError as exc:
        raise IOError(f"output directory {out!r} not writable: {exc}") from None
    return out


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# result rendering (every format renders the same in-memory result object)

def solve_result_doc(s: Scenario, year: str, model: int, clamp: str | None,
                     report: SolveReport) -> dict:
    flows = derive_flows(s, year, report.decision, clamp)
    return {
        "schema": SOLVE_JSON_SCHEMA,
        "scenario": scenario_digest(s),
        "year": year,
        "model": model,
        "clamp": clamp or s.options.requirement_clamp,
        "status": report.status,
        "nb": report.nb,
        "efd": report.efd,
        "decision": {
            "areas": {n: report.decision.areas[n] for n in s.crop_names()},
            "env_flow": list(report.decision.env_flow),
        },
        "derived": {
            "requirement": list(flows.requirement),
            "allocation": list(flows.allocation),
            "pumping": list(flows.pumping),
            "tef": list(flows.tef),
        },
        "solver": {
            "id": report.solver_id,
            "iterations": report.iterations,
            "certified": bool(report.certificate and report.certificate.passed),
        },
    }


def render_table(doc: dict, crop_names) -> str:
    """Text table shaped like the published solution tables: a crop-area
    row, then monthly env-flow and pumping rows, then (f1, f2)."""
    widths = [max(len(n), 10) for n in crop_names]
    head = "Crops      " + "  ".join(f"{n:>{w}}" for n, w in
                                     zip(crop_names, widths))
    areas = doc["decision"]["areas"]
    x_row = "X_c (ha)   " + "  ".join(
        f"{areas[n]:>{w}.1f}" for n, w in zip(crop_names, widths))
    mon_head = "Month      " + "  ".join(f"{m:>9}" for m in MONTHS)
    env_row = "Env.Flow   " + "  ".join(
        f"{v:>9.2f}" for v in doc["decision"]["env_flow"])
    pump_row = "P_m (GL)   " + "  ".join(
        f"{v:>9.2f}" for v in doc["derived"]["pumping"])
    f1 = doc["nb"]
    f2 = doc["efd"]
    tail = (f"f1 = {f1 / 1e10:.4f} x10^10 Tk    f2 = {f2:.4f} GL    "
            f"status = {doc['status']}")
    title = (f"Model {doc['model']}, year {doc['year']}, "
             f"clamp {doc['clamp']}")
    return "\n".join([title, head, x_row, mon_head, env_row, pump_row,
                      tail]) + "\n"


def solve_csv(doc: dict, crop_names) -> str:
    lines = ["series,month_or_crop,value"]
    for n in crop_names:
        lines.append(f"area,{n},{doc['decision']['areas'][n]!r}")
    for key in ("env_flow",):
        for m, v in zip(MONTHS, doc["decision"][key]):
            lines.append(f"{key},{m},{v!r}")
    for key in ("requirement", "allocation", "pumping", "tef"):
        for m, v in zip(MONTHS, doc["derived"][key]):
            lines.append(f"{key},{m},{v!r}")
    lines.append(f"objective,nb,{doc['nb']!r}")
    lines.append(f"objective,efd,{doc['efd']!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands

def cmd_solve(args) -> int:
    s = _load(args)
    if args.model not in ("1", "2"):
        if args.model == "3":
            raise UsageError("model 3 is the bi-objective trade-off; "
                             "use the 'pareto' command")
        raise UsageError(f"unknown model {args.model!r} (choose 1 or 2)")
    model = int(args.model)
    year = canonical_year_label(args.year)
    if year not in s.year_labels():
        raise UsageError(f"year {args.year!r} not in scenario "
                         f"(have {s.year_labels()})")
    clamp = _clamp(args)
    outdir = _outdir(args)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]

    report = solve_model(s, year, f"model{model}", clamp=clamp)
    if report.status != "optimal":
        print(f"solver failed: status={report.status}", file=sys.stderr)
        return EXIT_SOLVER

    doc = solve_result_doc(s, year, model, clamp, report)
    base = os.path.join(outdir, f"solve_{year}_model{model}")
    emitted = []
    if "table" in formats:
        text = render_table(doc, s.crop_names())
        _atomic_write(f"{base}.txt", text)
        emitted.append(f"{base}.txt")
        print(text, end="")
    if "json" in formats:
        _atomic_write(f"{base}.json",
                      json.dumps(doc, indent=2, sort_keys=True) + "\n")
        emitted.append(f"{base}.json")
    if "csv" in formats:
        _atomic_write(f"{base}.csv", solve_csv(doc, s.crop_names()))
        emitted.append(f"{base}.csv")
    if "plot" in formats:
        _atomic_write(f"{base}_plot.dat", f"# nb_Tk efd_GL\n"
                                          f"{doc['nb']!r} {doc['efd']!r}\n")
        emitted.append(f"{base}_plot.dat")
    for path in emitted:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_pareto(args) -> int:
    s = _load(args)
    year = canonical_year_label(args.year)
    if year not in s.year_labels():
        raise UsageError(f"year {args.year!r} not in scenario")
    if args.weights < 2:
        raise UsageError("--weights must be at least 2")
    clamp = _clamp(args)
    outdir = _outdir(args)
    formats = [f.strip() for f in args.format.split(",") if f.strip()]

    front = pareto_mod.compute_front(s, year, n_weights=args.weights,
                                     seed=args.seed, jitter=args.jitter,
                                     clamp=clamp)
    names = s.crop_names()
    base = os.path.join(outdir, f"front_{year}_w{args.weights}_s{args.seed}")
    if "csv" in formats:
        _atomic_write(f"{base}.csv", pareto_mod.front_to_csv(front, names))
    if "json" in formats:
        _atomic_write(f"{base}.json", pareto_mod.front_to_json(front, names))
    if "plot" in formats:
        _atomic_write(f"{base}_plot.dat", pareto_mod.front_to_plot_data(front))
    print(f"front: {len(front.points)} nondominated points "
          f"({len(front.diagnostics)} diagnostics)", file=sys.stderr)
    for p in front.points:
        print(f"  nb={p.nb!r} efd={p.efd!r} [{p.provenance}]",
              file=sys.stderr)
    return EXIT_OK


def _sweep_scenario(s: Scenario, param: str, value: float) -> Scenario:
    if param == "t_pump":
        return s.with_limits(t_pump=value)
    if param == "canal_cap":
        return s.with_limits(canal_cap=value)
    if param == "min_area_scale":
        new_crops = [replace(c, min_area=c.min_area * value) for c in s.crops]
        from .scenario import CropTable
        return replace(s, crops=CropTable(new_crops))
    if param == "tef_fraction_high":
        out = s
        for label in s.year_labels():
            y = s.years[label]
            frac = tuple(value if f < 1.0 else f for f in y.tef_fraction)
            out = out.with_tef_fraction(label, frac)
        return out
    raise UsageError(f"unknown sweep parameter {param!r}")


def sweep_rows(s: Scenario, year: str, model: int, param: str, values,
               clamp: str | None = None) -> list[dict]:
    rows = []
    for v in values:
        s_v = _sweep_scenario(s, param, v)
        report = solve_model(s_v, year, f"model{model}", clamp=clamp)
        if report.status != "optimal":
            rows.append({"value": v, "status": report.status})
            continue
        flows = derive_flows(s_v, year, report.decision, clamp)
        rows.append({"value": v, "status": "optimal", "nb": report.nb,
                     "efd": report.efd,
                     "total_pumping": float(np.sum(flows.pumping))})
    return rows


def cmd_sweep(args) -> int:
    s = _load(args)
    if args.model not in ("1", "2"):
        raise UsageError("sweep supports --model 1 or 2")
    model = int(args.model)
    year = canonical_year_label(args.year)
    if year not in s.year_labels():
        raise UsageError(f"year {args.year!r} not in scenario")
    try:
        values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from None
    if not values:
        raise UsageError("--values is empty")
    if args.param in ("t_pump", "canal_cap") and any(v <= 0 for v in values):
        raise UsageError(f"{args.param} values must be positive")
    if args.param == "tef_fraction_high" and any(
            not 0 <= v <= 1 for v in values):
        raise UsageError("tef_fraction_high values must lie in [0, 1]")
    if args.param == "min_area_scale" and any(v < 0 for v in values):
        raise UsageError("min_area_scale values must be nonnegative")
    clamp = _clamp(args)
    outdir = _outdir(args)

    rows = sweep_rows(s, year, model, args.param, values, clamp)
    lines = ["param,value,status,nb,efd,total_pumping"]
    for r in rows:
        lines.append(f"{args.param},{r['value']!r},{r['status']},"
                     f"{r.get('nb', '')!r},{r.get('efd', '')!r},"
                     f"{r.get('total_pumping', '')!r}")
    path = os.path.join(outdir, f"sweep_{args.param}_{year}_model{model}.csv")
    _atomic_write(path, "\n".join(lines) + "\n")
    print(f"wrote {path}", file=sys.stderr)
    if any(r["status"] != "optimal" for r in rows):
        return EXIT_SOLVER
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        if args.builtin:
            s = builtin_rajshahi()
        else:
            # load without the automatic raise so the report can be printed
            from . import scenario as scenario_mod
            path = args.scenario
            if os.path.isdir(path):
                s = scenario_mod._load_csv_bundle(path)
            else:
                s = scenario_mod._load_toml(path)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    report = validate(s)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "pareto":
            return cmd_pareto(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "validate":
            return cmd_validate(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except (IOError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RuntimeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
