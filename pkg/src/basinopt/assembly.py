"""Build the optimization problems and lower them to LP / MILP form.

Problem kinds
-------------
model1   maximize net benefit f1 over the constraint set        (LP)
model2   minimize environmental flow deficiency f2              (LP)
sub1(w)  minimize -w1*f1~  s.t.  w2*f2~ <= w1*f1~               (LP)
sub2(w)  minimize  w2*f2~  s.t.  w1*f1~ <= w2*f2~               (MILP)

where f1~ = F1_SCALE*f1 and f2~ = F2_SCALE*f2. The two objectives live on
wildly different scales (Tk ~1e10 vs GL ~1e2), so the scalarized
subproblems compare rescaled values; the scales are fixed constants,
recorded on every lowered program, and reported results are always
unscaled.

Lowering
--------
Every max(expr, 0) is replaced by an auxiliary column:

  u_m  requirement (only when the clamp mode is "monthly"): u >= W_m, u >= 0
  t_m  pumping:    t >= REQ_m - (inflow_m - E_m), t >= 0
  s_m  deficiency: s >= tef_m - E_m, s >= 0

For the LP kinds the objective (or the row the auxiliary appears in)
presses each auxiliary down onto its max expression, so the epigraph
relaxation is exact. In sub2 the scalarization row w1*f1~ - w2*f2~ <= 0
carries u, t and s with negative coefficients: inflating them would fake
feasibility. Each of those columns therefore gets an exact big-M encoding

  a >= expr, a >= 0, a <= expr + M*(1-z), a <= M*z, z binary

with per-month M computed from variable bounds (areas are limited by the
total-area row, env flows by inflow) times a 1.05 safety factor. A
post-solve audit checks that no M is binding at the returned optimum.

Two constraint families are folded into variable bounds rather than rows:
env_flow_m ∈ [max(0, inflow_m - canal_cap), inflow_m] enforces both the
canal-capacity and the flow-availability constraints; areas have lower
bound min_area and no upper bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hydrology import demand_coefficients
from .scenario import CLAMP_MODES, N_MONTHS, Scenario

PROBLEM_KINDS = ("model1", "model2", "sub1", "sub2")

# Fixed rescale factors applied to f1/f2 inside subproblem constraints.
F1_SCALE = 1e-8   # Tk -> O(1e2) for the regional instance
F2_SCALE = 1e-2   # GL -> O(1e0)

STRUCTURES = {
    "model1": "concave-max-LP",
    "model2": "convex-min-LP",
    "sub1": "convex-constrained-LP",
    "sub2": "reverse-convex-MILP",
}

BIGM_SAFETY = 1.05


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class WeightPair:
    """Scalarization weights: strictly positive, summing to one."""

    w1: float
    w2: float

    def __post_init__(self):
        if not (self.w1 > 0 and self.w2 > 0):
            raise AssemblyError(f"weights must be strictly positive, "
                                f"got ({self.w1}, {self.w2})")
        if abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise AssemblyError(f"weights must sum to 1, "
                                f"got {self.w1 + self.w2}")


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    scenario: Scenario
    year: str
    weight: WeightPair | None = None
    clamp: str | None = None  # None -> scenario default

    @property
    def structure(self) -> str:
        return STRUCTURES[self.kind]

    @property
    def clamp_mode(self) -> str:
        return self.scenario.options.requirement_clamp \
            if self.clamp is None else self.clamp


def build_problem(s: Scenario, year: str, kind: str,
                  weight: WeightPair | tuple | None = None,
                  clamp: str | None = None) -> ProblemSpec:
    """Validate and assemble a problem description."""
    if kind not in PROBLEM_KINDS:
        raise AssemblyError(f"unknown problem kind {kind!r}")
    s.year(year)  # raises KeyError for unknown labels
    if isinstance(weight, tuple):
        weight = WeightPair(*weight)
    needs_weight = kind in ("sub1", "sub2")
    if needs_weight and weight is None:
        raise AssemblyError(f"{kind} requires a weight pair")
    if not needs_weight and weight is not None:
        raise AssemblyError(f"{kind} takes no weight pair")
    if clamp is not None and clamp not in CLAMP_MODES:
        raise AssemblyError(f"unknown clamp mode {clamp!r}")
    return ProblemSpec(kind=kind, scenario=s, year=year,
                       weight=weight, clamp=clamp)


@dataclass
class Column:
    """Provenance of one lowered-program column."""

    kind: str   # area | env_flow | requirement | pumping | deficiency | binary
    index: object  # crop name for areas, month 0..11 otherwise
    binary_for: str | None = None  # aux kind this binary switches, for z cols


@dataclass
class LoweredProgram:
    """Sparse triplet LP/MILP with column provenance.

    Rows are senses '<=', '>=' or '=' against rhs. Bounds are [lo, hi]
    with np.inf allowed above. integrality marks binary columns.
    """

    sense: str                      # 'min' | 'max' for the objective
    c: np.ndarray                   # objective coefficients
    a_rows: list[int] = field(default_factory=list)
    a_cols: list[int] = field(default_factory=list)
    a_vals: list[float] = field(default_factory=list)
    row_sense: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    integrality: np.ndarray | None = None    # bool mask
    columns: list[Column] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    structure: str = ""
    scales: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    bigm: dict = field(default_factory=dict)  # aux col -> M value

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_rows, self.n_cols))
        for i, j, v in zip(self.a_rows, self.a_cols, self.a_vals):
            a[i, j] += v
        return a

    def columns_of(self, kind: str) -> list[int]:
        return [j for j, col in enumerate(self.columns) if col.kind == kind]


class _Builder:
    """Incremental construction of a LoweredProgram."""

    def __init__(self, sense: str, structure: str):
        self.lp = LoweredProgram(sense=sense, c=np.zeros(0),
                                 structure=structure)
        self._c: list[float] = []
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._int: list[bool] = []

    def add_col(self, kind, index, lo, hi, cost=0.0, integer=False,
                binary_for=None) -> int:
        j = len(self._c)
        self.lp.columns.append(Column(kind, index, binary_for))
        self._c.append(cost)
        self._lo.append(lo)
        self._hi.append(hi)
        self._int.append(integer)
        return j

    def add_row(self, name, coeffs: dict[int, float], sense: str, rhs: float):
        i = len(self.lp.rhs)
        for j, v in coeffs.items():
            if v != 0.0:
                self.lp.a_rows.append(i)
                self.lp.a_cols.append(j)
                self.lp.a_vals.append(float(v))
        self.lp.row_sense.append(sense)
        self.lp.rhs.append(float(rhs))
        self.lp.row_names.append(name)
        return i

    def set_cost(self, j: int, cost: float):
        self._c[j] = float(cost)

    def finish(self) -> LoweredProgram:
        self.lp.c = np.array(self._c)
        self.lp.lo = np.array(self._lo)
        self.lp.hi = np.array(self._hi)
        self.lp.integrality = np.array(self._int, dtype=bool)
        return self.lp


def _instance_arrays(p: ProblemSpec):
    s = p.scenario
    y = s.year(p.year)
    coef = demand_coefficients(s, p.year)       # (n_crops, 12) signed
    inflow = np.asarray(y.inflow)
    tef = np.asarray(y.tef())
    margins = np.array([c.gross_margin() for c in s.crops])
    mins = np.array(s.min_areas())
    e_lo = np.maximum(inflow - s.limits.canal_cap, 0.0)
    return s, y, coef, inflow, tef, margins, mins, e_lo


def _area_box_upper(s: Scenario) -> np.ndarray:
    """Valid per-crop upper bound implied by the total-area row."""
    mins = np.array(s.min_areas())
    return s.limits.t_area - (mins.sum() - mins)


def _requirement_upper(coef_month: np.ndarray, s: Scenario) -> float:
    """max of sum_c coef_c * X_c over {X >= min, sum X <= t_area}, coef >= 0."""
    mins = np.array(s.min_areas())
    spare = s.limits.t_area - mins.sum()
    return float(coef_month @ mins + max(spare, 0.0) * max(coef_month.max(), 0.0))


def _signed_w_bounds(coef_month: np.ndarray, s: Scenario) -> tuple[float, float]:
    """Interval of W_m = sum_c coef_c X_c over the area polytope."""
    mins = np.array(s.min_areas())
    spare = s.limits.t_area - mins.sum()
    base = float(coef_month @ mins)
    up = base + max(spare, 0.0) * max(coef_month.max(), 0.0)
    lo = base + max(spare, 0.0) * min(coef_month.min(), 0.0)
    return min(lo, base), max(up, base)


def _add_core(b: _Builder, p: ProblemSpec):
    """Columns and rows shared by every kind: areas, env flows, u/t chain,
    pump cap, total area. Returns handles used by objective assembly."""
    s, y, coef, inflow, tef, margins, mins, e_lo = _instance_arrays(p)
    clamp = p.clamp_mode
    n_crops = len(s.crops)
    area_cols = [b.add_col("area", c.name, lo=float(mn), hi=np.inf)
                 for c, mn in zip(s.crops, mins)]
    env_cols = [b.add_col("env_flow", m, lo=float(e_lo[m]), hi=float(inflow[m]))
                for m in range(N_MONTHS)]

    u_cols: list[int] = []
    if clamp == "monthly":
        for m in range(N_MONTHS):
            u = b.add_col("requirement", m, lo=0.0, hi=np.inf)
            # u_m - sum_c coef_cm X_c >= 0
            row = {u: 1.0}
            for j, col in zip(area_cols, coef[:, m]):
                row[j] = row.get(j, 0.0) - float(col)
            b.add_row(f"req_def[{m}]", row, ">=", 0.0)
            u_cols.append(u)

    # per-month linear requirement coefficients when u columns are absent
    if clamp == "per_crop":
        req_lin = np.maximum(coef, 0.0)         # (n_crops, 12)
    elif clamp == "none":
        req_lin = coef
    else:
        req_lin = None

    t_cols = []
    for m in range(N_MONTHS):
        t = b.add_col("pumping", m, lo=0.0, hi=np.inf)
        # t_m >= REQ_m - inflow_m + E_m
        row = {t: 1.0, env_cols[m]: -1.0}
        if clamp == "monthly":
            row[u_cols[m]] = row.get(u_cols[m], 0.0) - 1.0
        else:
            for j, cc in zip(area_cols, req_lin[:, m]):
                if cc != 0.0:
                    row[j] = row.get(j, 0.0) - float(cc)
        b.add_row(f"pump_def[{m}]", row, ">=", float(-inflow[m]))
        t_cols.append(t)

    b.add_row("pump_cap", {t: 1.0 for t in t_cols}, "<=", s.limits.t_pump)
    b.add_row("total_area", {j: 1.0 for j in area_cols}, "<=", s.limits.t_area)

    return dict(s=s, y=y, coef=coef, inflow=inflow, tef=tef, margins=margins,
                clamp=clamp, area_cols=area_cols, env_cols=env_cols,
                u_cols=u_cols, t_cols=t_cols, req_lin=req_lin)


def _f1_terms(h) -> tuple[dict[int, float], float]:
    """Linear coefficients of f1 over (X, E, u, t) columns, plus constant 0.

    f1 = sum margins_c X_c - cw * sum REQcost_m + (cw - cp) * sum t_m
    where REQcost is u (monthly clamp) or linear in X.
    """
    s = h["s"]
    cw, cp = s.economics.cw, s.economics.cp
    coeffs: dict[int, float] = {}
    for j, mg in zip(h["area_cols"], h["margins"]):
        coeffs[j] = coeffs.get(j, 0.0) + float(mg)
    if h["clamp"] == "monthly":
        for u in h["u_cols"]:
            coeffs[u] = coeffs.get(u, 0.0) - cw
    else:
        req_per_crop = h["req_lin"].sum(axis=1)   # total annual depth per crop
        for j, depth in zip(h["area_cols"], req_per_crop):
            coeffs[j] = coeffs.get(j, 0.0) - cw * float(depth)
    for t in h["t_cols"]:
        coeffs[t] = coeffs.get(t, 0.0) + (cw - cp)
    return coeffs, 0.0


def _add_deficiency_cols(b: _Builder, h) -> list[int]:
    s_cols = []
    for m in range(N_MONTHS):
        sc = b.add_col("deficiency", m, lo=0.0, hi=np.inf)
        # s_m >= tef_m - E_m
        b.add_row(f"def_def[{m}]", {sc: 1.0, h["env_cols"][m]: 1.0},
                  ">=", float(h["tef"][m]))
        s_cols.append(sc)
    return s_cols


def lower_to_lp(p: ProblemSpec) -> LoweredProgram:
    """Exact epigraph lowering for the three LP kinds."""
    if p.structure == "reverse-convex-MILP":
        raise AssemblyError("sub2 is reverse-convex; use lower_to_milp")

    b = _Builder(sense="max" if p.kind == "model1" else "min",
                 structure=p.structure)
    h = _add_core(b, p)

    if p.kind == "model1":
        f1, _ = _f1_terms(h)
        for j, v in f1.items():
            b.set_cost(j, v)

    elif p.kind == "model2":
        s_cols = _add_deficiency_cols(b, h)
        for sc in s_cols:
            b.set_cost(sc, 1.0)

    elif p.kind == "sub1":
        w = p.weight
        s_cols = _add_deficiency_cols(b, h)
        f1, _ = _f1_terms(h)
        # objective: min -w1 * F1_SCALE * f1
        for j, v in f1.items():
            b.set_cost(j, -w.w1 * F1_SCALE * v)
        # w2*F2_SCALE*sum(s) - w1*F1_SCALE*f1 <= 0
        row = {sc: w.w2 * F2_SCALE for sc in s_cols}
        for j, v in f1.items():
            row[j] = row.get(j, 0.0) - w.w1 * F1_SCALE * v
        b.add_row("scalarization", row, "<=", 0.0)

    lp = b.finish()
    lp.scales = {"f1": F1_SCALE, "f2": F2_SCALE} if p.kind == "sub1" else {}
    lp.meta = {"kind": p.kind, "year": p.year, "clamp": h["clamp"],
               "weight": (p.weight.w1, p.weight.w2) if p.weight else None}
    return lp


def lower_to_milp(p: ProblemSpec) -> LoweredProgram:
    """Exact big-M lowering of sub2 (reverse-convex scalarization).

    In the row w1*f1~ - w2*f2~ <= 0 every max-term auxiliary appears with a
    negative coefficient (u and t via f1's cost terms, s via -f2), so u, t
    and s all get binary-switched exact encodings. Without the s binaries
    the solver could inflate a deficiency column to fake-satisfy the row
    while the true point violates it.
    """
    if p.kind != "sub2":
        raise AssemblyError("lower_to_milp only applies to sub2")
    w = p.weight

    b = _Builder(sense="min", structure=p.structure)
    h = _add_core(b, p)
    s = h["s"]
    inflow, tef, coef = h["inflow"], h["tef"], h["coef"]
    s_cols = _add_deficiency_cols(b, h)

    # exact-value encodings -------------------------------------------------
    def encode_exact(aux_col: int, expr: dict[int, float], const: float,
                     m_bound: float, name: str):
        """aux = max(expr + const, 0) via binary z; expr maps col->coef."""
        z = b.add_col("binary", b.lp.columns[aux_col].index, lo=0.0, hi=1.0,
                      integer=True, binary_for=b.lp.columns[aux_col].kind)
        m_val = BIGM_SAFETY * m_bound + 1e-9
        # aux <= expr + const + M(1-z):  aux - expr + M z <= const + M
        row = {aux_col: 1.0, z: m_val}
        for j, v in expr.items():
            row[j] = row.get(j, 0.0) - v
        b.add_row(f"{name}_ub_expr", row, "<=", const + m_val)
        # aux <= M z
        b.add_row(f"{name}_ub_gate", {aux_col: 1.0, z: -m_val}, "<=", 0.0)
        b.lp.bigm[aux_col] = m_val
        return z

    clamp = h["clamp"]
    for m in range(N_MONTHS):
        # deficiency: s_m = max(tef_m - E_m, 0); |expr| <= max(tef, inflow-tef)
        m_s = max(float(tef[m]), float(inflow[m] - tef[m]), 1.0)
        encode_exact(s_cols[m], {h["env_cols"][m]: -1.0}, float(tef[m]),
                     m_s, f"s_exact[{m}]")

        # pumping: t_m = max(REQ_m - inflow_m + E_m, 0)
        if clamp == "monthly":
            expr = {h["u_cols"][m]: 1.0, h["env_cols"][m]: 1.0}
            req_hi = max(_signed_w_bounds(coef[:, m], s)[1], 0.0)
        else:
            expr = {h["env_cols"][m]: 1.0}
            for j, cc in zip(h["area_cols"], h["req_lin"][:, m]):
                if cc != 0.0:
                    expr[j] = expr.get(j, 0.0) + float(cc)
            req_hi = max(_requirement_upper(np.maximum(coef[:, m], 0.0)
                                            if clamp == "per_crop"
                                            else coef[:, m], s), 0.0)
            if clamp == "none":
                req_hi = max(_signed_w_bounds(coef[:, m], s)[1], 0.0)
        m_t = max(req_hi, float(inflow[m]), 1.0)
        encode_exact(h["t_cols"][m], expr, float(-inflow[m]), m_t,
                     f"t_exact[{m}]")

        # requirement u_m = max(W_m, 0) under monthly clamp
        if clamp == "monthly":
            w_lo, w_hi = _signed_w_bounds(coef[:, m], s)
            expr = {}
            for j, cc in zip(h["area_cols"], coef[:, m]):
                if cc != 0.0:
                    expr[j] = expr.get(j, 0.0) + float(cc)
            encode_exact(h["u_cols"][m], expr, 0.0,
                         max(abs(w_lo), abs(w_hi), 1.0), f"u_exact[{m}]")

    # objective: min w2 * F2_SCALE * sum s
    for sc in s_cols:
        b.set_cost(sc, w.w2 * F2_SCALE)

    # scalarization row: w1*f1~ - w2*f2~ <= 0
    f1, _ = _f1_terms(h)
    row = {j: w.w1 * F1_SCALE * v for j, v in f1.items()}
    for sc in s_cols:
        row[sc] = row.get(sc, 0.0) - w.w2 * F2_SCALE
    b.add_row("scalarization", row, "<=", 0.0)

    lp = b.finish()
    lp.scales = {"f1": F1_SCALE, "f2": F2_SCALE}
    lp.meta = {"kind": "sub2", "year": p.year, "clamp": clamp,
               "weight": (w.w1, w.w2)}
    return lp


def lower(p: ProblemSpec) -> LoweredProgram:
    return lower_to_milp(p) if p.kind == "sub2" else lower_to_lp(p)


# ---------------------------------------------------------------------------
# evaluation of lowered columns at a given decision (used by audits/tests)

def tight_auxiliaries(p: ProblemSpec, areas: np.ndarray,
                      env: np.ndarray) -> dict[str, np.ndarray]:
    """Exact max-expression values every auxiliary should take at (X, E)."""
    s = p.scenario
    y = s.year(p.year)
    coef = demand_coefficients(s, p.year)
    inflow = np.asarray(y.inflow)
    tef = np.asarray(y.tef())
    clamp = p.clamp_mode
    out: dict[str, np.ndarray] = {}
    w = coef.T @ areas
    if clamp == "monthly":
        req = np.maximum(w, 0.0)
        out["requirement"] = req
    elif clamp == "per_crop":
        req = np.maximum(coef, 0.0).T @ areas
    else:
        req = w
    out["pumping"] = np.maximum(req - (inflow - env), 0.0)
    out["deficiency"] = np.maximum(tef - env, 0.0)
    return out


# ---------------------------------------------------------------------------
# MPS export

def export_mps(lp: LoweredProgram, name: str = "BASINOPT") -> str:
    """Serialize in free MPS format (fixed-compatible column layout)."""
    lines = [f"NAME          {name}", "ROWS", " N  OBJ"]
    sense_tag = {"<=": " L ", ">=": " G ", "=": " E "}
    row_ids = []
    for i, sn in enumerate(lp.row_sense):
        rid = f"R{i:06d}"
        row_ids.append(rid)
        lines.append(f"{sense_tag[sn]} {rid}")

    # column-major entries
    by_col: dict[int, list[tuple[str, float]]] = {}
    for i, j, v in zip(lp.a_rows, lp.a_cols, lp.a_vals):
        by_col.setdefault(j, []).append((row_ids[i], v))

    obj = lp.c if lp.sense == "min" else -lp.c  # MPS convention: minimize
    lines.append("COLUMNS")
    in_int = False
    for j, col in enumerate(lp.columns):
        is_int = bool(lp.integrality[j])
        if is_int and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        if not is_int and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        cid = f"C{j:06d}"
        entries = []
        if obj[j] != 0.0:
            entries.append(("OBJ", float(obj[j])))
        entries.extend(by_col.get(j, []))
        if not entries:
            entries.append(("OBJ", 0.0))
        for rid, v in entries:
            lines.append(f"    {cid:<10}{rid:<10}{float(v)!r}")
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")

    lines.append("RHS")
    for i, v in enumerate(lp.rhs):
        if v != 0.0:
            lines.append(f"    RHS       {row_ids[i]:<10}{float(v)!r}")

    lines.append("BOUNDS")
    for j in range(lp.n_cols):
        cid = f"C{j:06d}"
        if lp.integrality[j]:
            lines.append(f" BV BND       {cid}")
            continue
        lo, hi = lp.lo[j], lp.hi[j]
        if lo != 0.0:
            lines.append(f" LO BND       {cid:<10}{float(lo)!r}")
        if np.isfinite(hi):
            lines.append(f" UP BND       {cid:<10}{float(hi)!r}")
        else:
            lines.append(f" PL BND       {cid}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
