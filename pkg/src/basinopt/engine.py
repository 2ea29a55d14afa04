"""Solve orchestration: run lowered programs, certify, report.

Certification never trusts the LP algebra: objectives are recomputed from
the decision by the hydrology evaluators, feasibility is re-checked against
the original constraint set, every epigraph auxiliary is compared with its
exact max expression, and scalarized subproblems get their constraint
re-verified on the recomputed (rescaled) objective values. A failed audit
downgrades the report's status and records what went wrong.

Returned solutions are canonicalized first: auxiliary columns are replaced
by their exact max-expression values at the returned decision. For a true
optimum this is a no-op on the objective (the lowerings press auxiliaries
onto their bounds), but it makes reports deterministic on degenerate faces
and turns the tightness audit into a genuine equivalence check: the
canonical point must still satisfy every row at the same objective value.

Model solves apply documented lexicographic tie-breaks:

  model1: maximize net benefit, then minimize deficiency among optima
          (deficiency is free in months whose requirement is already
          covered by surface water, so the secondary stage pins it);
  model2: minimize deficiency, then total planted area, then total pumping
          (deficiency does not depend on areas at all).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import assembly
from .assembly import (F1_SCALE, F2_SCALE, LoweredProgram, ProblemSpec,
                       WeightPair, build_problem, lower_to_lp, lower_to_milp)
from .hydrology import (DecisionVector, check_feasible, eval_efd,
                        eval_net_benefit)
from .milp import MilpResult, solve_dense_milp
from .scenario import N_MONTHS, Scenario
from .simplex import solve_dense_lp

TIGHTNESS_RTOL = 1e-8
OBJECTIVE_RTOL = 1e-6


class EngineError(RuntimeError):
    pass


@dataclass
class CertificateAudit:
    passed: bool = True
    flags: list[str] = field(default_factory=list)
    max_tightness_residual: float = 0.0    # relative, aux vs max expression
    objective_residual: float = 0.0        # relative, lowered vs recomputed
    feasibility_ok: bool = True
    scalarization_ok: bool = True

    def fail(self, msg: str):
        self.passed = False
        self.flags.append(msg)

    def summary(self) -> str:
        head = "certified" if self.passed else "AUDIT FAILED"
        tail = "; ".join(self.flags) if self.flags else "all checks passed"
        return (f"{head}: tightness<= {self.max_tightness_residual:.2e}, "
                f"objective residual {self.objective_residual:.2e}; {tail}")


@dataclass
class SolveReport:
    status: str            # optimal | infeasible | unbounded | iteration-limit | local-only
    solver_id: str         # simplex | branch-bound | smoothed-multistart
    objective: float | None = None   # unscaled, original sense of the kind
    nb: float | None = None          # recomputed net benefit, Tk
    efd: float | None = None         # recomputed deficiency, GL
    decision: DecisionVector | None = None
    auxiliaries: dict = field(default_factory=dict)  # (kind, month) -> value
    iterations: int = 0
    nodes: int = 0
    wall_time: float = 0.0
    certificate: CertificateAudit | None = None
    bound: float | None = None       # MILP proven bound
    gap: float | None = None
    trace: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _extract(lp: LoweredProgram, x: np.ndarray):
    areas, env = {}, [0.0] * N_MONTHS
    aux: dict[tuple[str, object], float] = {}
    for j, col in enumerate(lp.columns):
        if col.kind == "area":
            areas[col.index] = float(x[j])
        elif col.kind == "env_flow":
            env[col.index] = float(x[j])
        else:
            aux[(col.kind, col.index)] = float(x[j])
    return areas, tuple(env), aux


def _unscale_objective(lp: LoweredProgram, raw: float) -> float:
    kind = lp.meta.get("kind")
    if kind in (None, "model1", "model2", "stage"):
        return raw
    w1, w2 = lp.meta["weight"]
    if kind == "sub1":      # raw = min -w1*F1_SCALE*f1
        return -raw / (w1 * F1_SCALE)
    if kind == "sub2":      # raw = min w2*F2_SCALE*f2
        return raw / (w2 * F2_SCALE)
    return raw


def _canonicalize(lp: LoweredProgram, p: ProblemSpec, x: np.ndarray,
                  audit: CertificateAudit) -> np.ndarray:
    """Replace auxiliaries (and binaries) by exact values at the decision;
    verify the canonical point still satisfies the program."""
    areas_d, env_d, _ = _extract(lp, x)
    s = p.scenario
    areas = np.array([areas_d[name] for name in s.crop_names()])
    env = np.asarray(env_d)
    tight = assembly.tight_auxiliaries(p, areas, env)

    x_canon = x.copy()
    raw_resid = 0.0
    for j, col in enumerate(lp.columns):
        if col.kind in ("requirement", "pumping", "deficiency"):
            want = float(tight[col.kind][col.index])
            scale = max(1.0, abs(want))
            raw_resid = max(raw_resid, abs(x[j] - want) / scale)
            x_canon[j] = want
        elif col.kind == "binary":
            want = float(tight[col.binary_for][col.index])
            x_canon[j] = 1.0 if want > 0.0 else 0.0
    audit.max_tightness_residual = raw_resid

    # canonical point must satisfy every row and reproduce the objective
    a = lp.dense_matrix()
    if lp.n_rows:
        lhs = a @ x_canon
        for i, (sn, rhs) in enumerate(zip(lp.row_sense, lp.rhs)):
            scale = max(1.0, abs(rhs),
                        float(np.max(np.abs(a[i]))) * max(1.0, np.max(np.abs(x_canon))))
            resid = (lhs[i] - rhs if sn == "<=" else
                     rhs - lhs[i] if sn == ">=" else abs(lhs[i] - rhs))
            if resid > 1e-7 * scale:
                audit.fail(f"canonical point violates row "
                           f"{lp.row_names[i]} by {resid:.3e}")
    obj_raw = float(lp.c @ x)
    obj_canon = float(lp.c @ x_canon)
    drift = abs(obj_canon - obj_raw) / max(1.0, abs(obj_raw))
    if drift > OBJECTIVE_RTOL:
        audit.fail(f"canonicalization moved the objective by {drift:.3e} "
                   "(auxiliary not tight at optimum)")
    return x_canon


def solve_lp(lp: LoweredProgram, tol: float = 1e-9,
             problem: ProblemSpec | None = None,
             collect_trace: bool = False) -> SolveReport:
    """Solve an LP lowering with the bounded simplex and audit tightness."""
    if lp.integrality is not None and lp.integrality.any():
        raise EngineError("lowering has binaries; use solve_milp")
    t0 = time.perf_counter()
    res = solve_dense_lp(lp.c, lp.dense_matrix(), lp.row_sense, lp.rhs,
                         lp.lo, lp.hi, maximize=(lp.sense == "max"), tol=tol,
                         collect_trace=collect_trace)
    wall = time.perf_counter() - t0
    report = SolveReport(status=res.status, solver_id="simplex",
                         iterations=res.iterations, wall_time=wall,
                         trace=list(res.trace or []), meta=dict(lp.meta))
    if res.status != "optimal":
        if res.status == "infeasible":
            report.meta["infeasible_rows"] = [
                lp.row_names[i] for i in res.infeasible_rows
                if 0 <= i < len(lp.row_names)]
        elif res.status == "unbounded" and res.ray is not None:
            report.meta["ray"] = res.ray.tolist()
        return report

    audit = CertificateAudit()
    x = res.x
    if problem is not None:
        x = _canonicalize(lp, problem, x, audit)
    areas, env, aux = _extract(lp, x)
    report.decision = DecisionVector(areas=areas, env_flow=env)
    report.auxiliaries = aux
    raw_obj = float(lp.c @ x)
    report.objective = _unscale_objective(lp, raw_obj)
    report.meta["duals"] = dict(zip(lp.row_names, res.duals.tolist()))
    report.certificate = audit
    if not audit.passed:
        report.status = "local-only"
    return report


def solve_milp(lp: LoweredProgram, gap: float = 1e-6,
               node_limit: int = 10000,
               problem: ProblemSpec | None = None) -> SolveReport:
    """Solve a big-M lowering by branch and bound; audit the big-M margins."""
    if lp.integrality is None or not lp.integrality.any():
        raise EngineError("lowering has no binaries; use solve_lp")
    t0 = time.perf_counter()
    res: MilpResult = solve_dense_milp(
        lp.c, lp.dense_matrix(), lp.row_sense, lp.rhs, lp.lo, lp.hi,
        lp.integrality, maximize=(lp.sense == "max"), gap=gap,
        node_limit=node_limit)
    wall = time.perf_counter() - t0
    report = SolveReport(status=res.status, solver_id="branch-bound",
                         nodes=res.nodes, iterations=res.iterations,
                         wall_time=wall, gap=res.gap, trace=res.trace,
                         meta=dict(lp.meta))
    if res.x is None:
        return report

    audit = CertificateAudit()
    x = res.x
    if problem is not None:
        x = _canonicalize(lp, problem, x, audit)
    # big-M audit: no gate may be binding at the optimum
    for j, m_val in lp.bigm.items():
        if x[j] > m_val * 0.999:
            audit.fail(f"big-M binding on column {j} "
                       f"({lp.columns[j].kind}[{lp.columns[j].index}])")
    areas, env, aux = _extract(lp, x)
    report.decision = DecisionVector(areas=areas, env_flow=env)
    report.auxiliaries = aux
    report.objective = _unscale_objective(lp, float(lp.c @ x))
    report.bound = _unscale_objective(lp, res.bound) if res.bound is not None else None
    report.certificate = audit
    if not audit.passed and report.status == "optimal":
        report.status = "local-only"
    return report


def certify(report: SolveReport, s: Scenario, year: str, kind: str,
            weight: WeightPair | None = None,
            clamp: str | None = None) -> CertificateAudit:
    """Re-derive everything from the decision via the hydrology evaluators.

    Checks: feasibility slacks, auxiliary tightness against max expressions,
    agreement of the lowered objective with the recomputed value, and the
    scalarization inequality for sub1/sub2 (on rescaled recomputed values).
    Audit failure downgrades the report status and flags the discrepancy.
    """
    audit = report.certificate or CertificateAudit()
    report.certificate = audit
    if report.decision is None:
        audit.fail("report carries no decision vector")
        return audit

    d = report.decision
    nb = float(eval_net_benefit(s, year, d, mode="extended", clamp=clamp))
    efd = float(eval_efd(s, year, d))
    report.nb, report.efd = nb, efd

    verdict = check_feasible(s, year, d, clamp=clamp)
    audit.feasibility_ok = verdict.feasible
    if not verdict.feasible:
        audit.fail(f"decision infeasible: {', '.join(verdict.violations)}")

    # auxiliary tightness against the hydrology-side expressions
    p = build_problem(s, year, kind, weight=weight, clamp=clamp)
    areas = d.area_vector(s)
    tight = assembly.tight_auxiliaries(p, areas, np.asarray(d.env_flow))
    worst = audit.max_tightness_residual
    for (akind, m), val in report.auxiliaries.items():
        if akind == "binary":
            continue
        want = float(tight[akind][m])
        resid = abs(val - want) / max(1.0, abs(want))
        worst = max(worst, resid)
        if resid > TIGHTNESS_RTOL:
            audit.fail(f"auxiliary not tight: {akind}[{m}] = {val!r}, "
                       f"max expression {want!r}")
    audit.max_tightness_residual = worst

    # objective agreement, lowered algebra vs recomputed evaluators
    if report.objective is not None:
        want = nb if kind in ("model1", "sub1") else efd
        resid = abs(report.objective - want) / max(1.0, abs(want))
        audit.objective_residual = max(audit.objective_residual, resid)
        if resid > OBJECTIVE_RTOL:
            audit.fail(f"objective mismatch: lowered {report.objective!r} "
                       f"vs recomputed {want!r}")

    # scalarization faithfulness on recomputed values
    if kind in ("sub1", "sub2"):
        w = weight
        lhs_tol = 1e-7 * max(1.0, abs(F1_SCALE * nb), abs(F2_SCALE * efd))
        if kind == "sub1":
            ok = w.w2 * F2_SCALE * efd <= w.w1 * F1_SCALE * nb + lhs_tol
        else:
            ok = w.w1 * F1_SCALE * nb <= w.w2 * F2_SCALE * efd + lhs_tol
        audit.scalarization_ok = bool(ok)
        if not ok:
            audit.fail(f"scalarization constraint violated on recomputed "
                       f"values (kind={kind}, w=({w.w1}, {w.w2}))")

    if not audit.passed and report.status == "optimal":
        report.status = "local-only"
    return audit


# ---------------------------------------------------------------------------
# model-level solves with lexicographic tie-breaks

def _stage_objective(p: ProblemSpec, lp: LoweredProgram, which: str) -> np.ndarray:
    """Cost vector over lp's columns for f1, f2, total area or total pumping."""
    s = p.scenario
    cw, cp = s.economics.cw, s.economics.cp
    c = np.zeros(lp.n_cols)
    clamp = p.clamp_mode
    if which == "f1":
        coef = assembly.demand_coefficients(s, p.year)
        if clamp == "per_crop":
            depth = np.maximum(coef, 0.0).sum(axis=1)
        elif clamp == "none":
            depth = coef.sum(axis=1)
        else:
            depth = None
        margins = {crop.name: crop.gross_margin() for crop in s.crops}
        name_to_row = {crop.name: i for i, crop in enumerate(s.crops)}
        for j, col in enumerate(lp.columns):
            if col.kind == "area":
                c[j] = margins[col.index]
                if depth is not None:
                    c[j] -= cw * float(depth[name_to_row[col.index]])
            elif col.kind == "requirement":
                c[j] = -cw
            elif col.kind == "pumping":
                c[j] = cw - cp
    elif which == "f2":
        for j, col in enumerate(lp.columns):
            if col.kind == "deficiency":
                c[j] = 1.0
    elif which == "area_total":
        for j, col in enumerate(lp.columns):
            if col.kind == "area":
                c[j] = 1.0
    elif which == "pump_total":
        for j, col in enumerate(lp.columns):
            if col.kind == "pumping":
                c[j] = 1.0
    else:
        raise EngineError(f"unknown stage objective {which!r}")
    return c


MODEL_STAGES = {
    "model1": (("f1", "max"), ("f2", "min")),
    "model2": (("f2", "min"), ("area_total", "min"), ("pump_total", "min")),
}


def solve_model(s: Scenario, year: str, kind: str,
                weight: WeightPair | tuple | None = None,
                clamp: str | None = None, tiebreak: bool = True,
                gap: float = 1e-6, node_limit: int = 10000) -> SolveReport:
    """Certified solve of one problem kind on one year type."""
    p = build_problem(s, year, kind, weight=weight, clamp=clamp)
    if kind == "sub1":
        lp = lower_to_lp(p)
        report = solve_lp(lp, problem=p)
    elif kind == "sub2":
        lp = lower_to_milp(p)
        report = solve_milp(lp, gap=gap, node_limit=node_limit, problem=p)
    else:
        report = _solve_lexicographic(p, tiebreak)
    if report.decision is not None:
        certify(report, s, year, kind, weight=p.weight, clamp=clamp)
    return report


def _run_stages(base: ProblemSpec, lp, stages, report_objective: str):
    """Optimize the stage objectives in order on one shared lowering,
    pinning each finished stage with an equality row."""
    t0 = time.perf_counter()
    report = None
    total_iter = 0
    for idx, (which, sense) in enumerate(stages):
        lp.c = _stage_objective(base, lp, which)
        lp.sense = sense
        report = solve_lp(lp, problem=base)
        total_iter += report.iterations
        if report.status != "optimal":
            break
        if idx < len(stages) - 1:
            value = float(lp.c @ _full_vector(lp, report))
            coeffs = {j: float(v) for j, v in enumerate(lp.c) if v != 0.0}
            lp.a_rows.extend([lp.n_rows] * len(coeffs))
            lp.a_cols.extend(coeffs.keys())
            lp.a_vals.extend(coeffs.values())
            lp.row_sense.append("=")
            lp.rhs.append(value)
            lp.row_names.append(f"stage_{idx}_{which}")

    report.iterations = total_iter
    report.wall_time = time.perf_counter() - t0
    report.meta["stages"] = [w for w, _ in stages]
    if report.status == "optimal":
        report.objective = float(
            _stage_objective(base, lp, report_objective)
            @ _full_vector(lp, report))
    return report


def _solve_lexicographic(p: ProblemSpec, tiebreak: bool) -> SolveReport:
    """Stage-wise solve; model2's lowering carries every column family
    (areas, env, u, t, s), so it serves as the shared program for both
    models' stages."""
    base = build_problem(p.scenario, p.year, "model2", clamp=p.clamp)
    lp = lower_to_lp(base)
    lp.meta["kind"] = p.kind
    stages = MODEL_STAGES[p.kind]
    if not tiebreak:
        stages = stages[:1]
    report = _run_stages(base, lp, stages,
                         "f1" if p.kind == "model1" else "f2")
    report.meta["kind"] = p.kind
    return report


def solve_epsilon_constraint(s: Scenario, year: str, efd_cap: float,
                             clamp: str | None = None) -> SolveReport:
    """Maximize net benefit subject to deficiency <= efd_cap (then minimize
    deficiency among the optima). Used to polish scalarization candidates
    onto the efficient frontier at a proposed deficiency level."""
    base = build_problem(s, year, "model2", clamp=clamp)
    lp = lower_to_lp(base)
    lp.meta["kind"] = "model1"
    s_cols = lp.columns_of("deficiency")
    lp.a_rows.extend([lp.n_rows] * len(s_cols))
    lp.a_cols.extend(s_cols)
    lp.a_vals.extend([1.0] * len(s_cols))
    lp.row_sense.append("<=")
    lp.rhs.append(float(efd_cap))
    lp.row_names.append("efd_cap")
    report = _run_stages(base, lp, MODEL_STAGES["model1"], "f1")
    report.meta["kind"] = "epsilon-constraint"
    report.meta["efd_cap"] = float(efd_cap)
    if report.decision is not None:
        certify(report, s, year, "model1", clamp=clamp)
    return report


def _full_vector(lp: LoweredProgram, report: SolveReport) -> np.ndarray:
    x = np.zeros(lp.n_cols)
    for j, col in enumerate(lp.columns):
        if col.kind == "area":
            x[j] = report.decision.areas[col.index]
        elif col.kind == "env_flow":
            x[j] = report.decision.env_flow[col.index]
        else:
            x[j] = report.auxiliaries[(col.kind, col.index)]
    return x
