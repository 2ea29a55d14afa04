"""Trade-off front driver: anchors, weights, paired subproblems, filtering.

The bi-objective model (maximize net benefit, minimize deficiency) is
traced by a weighted-constraint scalarization: for each weight pair, one
subproblem maximizes benefit subject to weighted deficiency not exceeding
weighted benefit (an LP after epigraph lowering), the other minimizes
deficiency subject to the reversed inequality (reverse-convex, solved as an
exact big-M MILP). Coinciding solutions are recorded once; otherwise the
dominated candidate is discarded. Anchor points come from certified solves
of the two single-objective models with their documented tie-breaks.

Because benefit (Tk, ~1e10) and deficiency (GL, ~1e2) are compared inside
the subproblem constraints, both enter rescaled (see assembly.F1_SCALE /
F2_SCALE); weights therefore act on the rescaled values, and with uniform
grid weights the constraint only binds for small w1. Larger weight counts
give denser fronts.

Every emitted point is certified (recomputed objectives, feasibility,
tightness) before it can enter a front; uncertified candidates are dropped
with a diagnostic rather than plotted as outliers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .assembly import F1_SCALE, F2_SCALE, WeightPair
from .engine import SolveReport, solve_epsilon_constraint, solve_model
from .hydrology import DecisionVector
from .scenario import MONTHS, Scenario, scenario_digest

COINCIDE_RTOL = 1e-6   # decisions equal when components agree to this
MERGE_RTOL = 1e-8      # objective-equal points are merged in the front


@dataclass(frozen=True)
class ParetoPoint:
    nb: float
    efd: float
    decision: DecisionVector
    provenance: str                  # sub1 | sub2 | anchor-f1 | anchor-f2
    weight: WeightPair | None = None

    def objectives(self) -> tuple[float, float]:
        return self.nb, self.efd


@dataclass
class ParetoFront:
    points: list[ParetoPoint]
    year: str
    scenario_stamp: str
    seed: int | None
    n_weights: int | None
    clamp: str | None = None
    diagnostics: list[str] = field(default_factory=list)


def dominates(p: ParetoPoint, q: ParetoPoint, eps: float = 0.0) -> bool:
    """p dominates q: no worse in both objectives, better in at least one."""
    ge_nb = p.nb >= q.nb - eps
    le_efd = p.efd <= q.efd + eps
    strict = p.nb > q.nb + eps or p.efd < q.efd - eps
    return ge_nb and le_efd and strict


def generate_weights(n: int, seed: int | None = None,
                     jitter: bool = False) -> list[WeightPair]:
    """n interior pairs on a uniform grid w1 = k/(n+1), optionally jittered.

    Jitter amplitude is 1/(4(n+1)), seeded and clamped so pairs stay
    strictly interior. Identical seeds give identical sequences.
    """
    if n < 2:
        raise ValueError(f"need at least 2 weights, got {n}")
    grid = [k / (n + 1) for k in range(1, n + 1)]
    if jitter:
        rng = np.random.default_rng(seed)
        amp = 1.0 / (4.0 * (n + 1))
        eps = 1.0 / (100.0 * (n + 1))
        grid = [min(max(w + rng.uniform(-amp, amp), eps), 1.0 - eps)
                for w in grid]
    return [WeightPair(w1=w, w2=1.0 - w) for w in grid]


def _point_from_report(report: SolveReport, provenance: str,
                       weight: WeightPair | None) -> ParetoPoint:
    return ParetoPoint(nb=report.nb, efd=report.efd,
                       decision=report.decision, provenance=provenance,
                       weight=weight)


def anchors(s: Scenario, year: str,
            clamp: str | None = None) -> tuple[ParetoPoint, ParetoPoint]:
    """Certified single-objective optima (anchor-f1, anchor-f2)."""
    r1 = solve_model(s, year, "model1", clamp=clamp)
    r2 = solve_model(s, year, "model2", clamp=clamp)
    for kind, r in (("model1", r1), ("model2", r2)):
        if r.status != "optimal":
            raise RuntimeError(f"anchor solve {kind} failed: {r.status}")
    return (_point_from_report(r1, "anchor-f1", None),
            _point_from_report(r2, "anchor-f2", None))


@dataclass
class PairOutcome:
    points: list[ParetoPoint]
    sub1_status: str
    sub2_status: str
    notes: list[str] = field(default_factory=list)


def _decisions_coincide(a: DecisionVector, b: DecisionVector) -> bool:
    names = sorted(a.areas)
    for n in names:
        va, vb = a.areas[n], b.areas[n]
        if abs(va - vb) > COINCIDE_RTOL * max(1.0, abs(va), abs(vb)):
            return False
    for va, vb in zip(a.env_flow, b.env_flow):
        if abs(va - vb) > COINCIDE_RTOL * max(1.0, abs(va), abs(vb)):
            return False
    return True


def filter_pair_candidates(cands: list[ParetoPoint]) -> list[ParetoPoint]:
    """Step-4(b) selection: coinciding decisions are recorded once (first
    candidate kept), otherwise the dominated candidate is discarded and
    incomparable candidates are both kept."""
    if len(cands) < 2:
        return list(cands)
    a, b = cands
    if _decisions_coincide(a.decision, b.decision):
        return [a]
    if dominates(a, b):
        return [a]
    if dominates(b, a):
        return [b]
    return [a, b]


def _polish_sub2(s: Scenario, year: str, cand: ParetoPoint,
                 clamp: str | None, notes: list[str]) -> ParetoPoint:
    """Lift a subproblem-2 candidate onto the efficient frontier.

    Subproblem 2's constraint caps weighted benefit from above, so its
    optimum is only weakly Pareto optimal: at the same deficiency a richer
    feasible point may exist that the weight pair cannot see. Re-maximizing
    benefit at the candidate's deficiency level fixes that; the candidate's
    deficiency (the value subproblem 2 actually optimized) is preserved.
    """
    cap = cand.efd + 1e-9 * max(1.0, abs(cand.efd))
    refined = solve_epsilon_constraint(s, year, cap, clamp=clamp)
    if refined.status != "optimal" or refined.certificate is None \
            or not refined.certificate.passed:
        notes.append(f"sub2 polish at efd={cand.efd!r} failed "
                     f"({refined.status}); keeping the raw candidate")
        return cand
    if refined.nb < cand.nb - 1e-6 * max(1.0, abs(cand.nb)):
        return cand  # cannot happen for a correct solve; keep the better
    return ParetoPoint(nb=refined.nb, efd=refined.efd,
                       decision=refined.decision, provenance=cand.provenance,
                       weight=cand.weight)


def solve_weight_pair(s: Scenario, year: str, w: WeightPair,
                      clamp: str | None = None, gap: float = 1e-6,
                      node_limit: int = 10000) -> PairOutcome:
    """Solve both scalarized subproblems for one weight pair.

    Coinciding certified solutions give one point; otherwise the dominated
    candidate is dropped. A candidate that fails certification is dropped
    with a note (never emitted as an outlier). Subproblem-2 candidates are
    polished onto the efficient frontier before the comparison (subproblem
    1's optimum is already benefit-maximal at its own deficiency level).
    """
    r1 = solve_model(s, year, "sub1", weight=w, clamp=clamp)
    r2 = solve_model(s, year, "sub2", weight=w, clamp=clamp, gap=gap,
                     node_limit=node_limit)
    out = PairOutcome(points=[], sub1_status=r1.status, sub2_status=r2.status)

    cands: list[ParetoPoint] = []
    for name, rep in (("sub1", r1), ("sub2", r2)):
        if rep.status != "optimal":
            out.notes.append(f"{name} w1={w.w1!r}: {rep.status}")
            continue
        if rep.certificate is not None and not rep.certificate.passed:
            out.notes.append(f"{name} w1={w.w1!r}: certification failed "
                             f"({'; '.join(rep.certificate.flags)})")
            continue
        point = _point_from_report(rep, name, w)
        if name == "sub2":
            point = _polish_sub2(s, year, point, clamp, out.notes)
        cands.append(point)
    out.points = filter_pair_candidates(cands)
    return out


def assemble_front(candidates, year: str = "", scenario: Scenario | None = None,
                   seed: int | None = None, n_weights: int | None = None,
                   clamp: str | None = None,
                   diagnostics: list[str] | None = None) -> ParetoFront:
    """Deduplicate, filter dominated points, sort by net benefit.

    Candidates are canonically ordered first (anchors, then by weight), so
    tolerance-equal duplicates keep the lowest weight index regardless of
    the order solves finished in.
    """
    def order_key(p: ParetoPoint):
        w1 = -1.0 if p.weight is None else p.weight.w1
        return (0 if p.provenance.startswith("anchor") else 1, w1,
                p.provenance)

    ordered = sorted(candidates, key=order_key)
    unique: list[ParetoPoint] = []
    for p in ordered:
        dup = any(
            abs(p.nb - q.nb) <= MERGE_RTOL * max(1.0, abs(p.nb), abs(q.nb))
            and abs(p.efd - q.efd) <= MERGE_RTOL * max(1.0, abs(p.efd),
                                                       abs(q.efd))
            for q in unique)
        if not dup:
            unique.append(p)

    nondom = [p for p in unique
              if not any(dominates(q, p) for q in unique if q is not p)]
    nondom.sort(key=lambda p: (p.nb, p.efd))
    stamp = scenario_digest(scenario) if scenario is not None else ""
    return ParetoFront(points=nondom, year=year, scenario_stamp=stamp,
                       seed=seed, n_weights=n_weights, clamp=clamp,
                       diagnostics=list(diagnostics or []))


def compute_front(s: Scenario, year: str, n_weights: int, seed: int = 0,
                  jitter: bool = False, clamp: str | None = None,
                  gap: float = 1e-6, node_limit: int = 10000) -> ParetoFront:
    """Full driver: anchors + weight grid + paired solves + assembly."""
    a1, a2 = anchors(s, year, clamp=clamp)
    candidates: list[ParetoPoint] = [a1, a2]
    notes: list[str] = []
    for w in generate_weights(n_weights, seed=seed, jitter=jitter):
        outcome = solve_weight_pair(s, year, w, clamp=clamp, gap=gap,
                                    node_limit=node_limit)
        candidates.extend(outcome.points)
        notes.extend(outcome.notes)
    return assemble_front(candidates, year=year, scenario=s, seed=seed,
                          n_weights=n_weights, clamp=clamp, diagnostics=notes)


# ---------------------------------------------------------------------------
# export (schemas are versioned; no timestamps, so identical runs are
# byte-identical)

FRONT_CSV_SCHEMA = "basinopt.front-csv/1"
FRONT_JSON_SCHEMA = "basinopt.front/1"


def front_to_csv(front: ParetoFront, crop_names) -> str:
    cols = (["nb", "efd", "w1", "provenance"]
            + [f"area_{n.replace(' ', '_')}" for n in crop_names]
            + [f"env_flow_{m}" for m in MONTHS])
    lines = [f"# schema={FRONT_CSV_SCHEMA} year={front.year} "
             f"scenario={front.scenario_stamp} seed={front.seed} "
             f"weights={front.n_weights}"]
    lines.append(",".join(cols))
    for p in front.points:
        w1 = "" if p.weight is None else repr(p.weight.w1)
        row = [repr(p.nb), repr(p.efd), w1, p.provenance]
        row += [repr(p.decision.areas[n]) for n in crop_names]
        row += [repr(v) for v in p.decision.env_flow]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def front_to_json(front: ParetoFront, crop_names) -> str:
    doc = {
        "schema": FRONT_JSON_SCHEMA,
        "year": front.year,
        "scenario": front.scenario_stamp,
        "seed": front.seed,
        "n_weights": front.n_weights,
        "clamp": front.clamp,
        "objective_scales": {"nb": F1_SCALE, "efd": F2_SCALE},
        "points": [
            {
                "nb": p.nb,
                "efd": p.efd,
                "w1": None if p.weight is None else p.weight.w1,
                "provenance": p.provenance,
                "decision": {
                    "areas": {n: p.decision.areas[n] for n in crop_names},
                    "env_flow": list(p.decision.env_flow),
                },
            }
            for p in front.points
        ],
        "diagnostics": front.diagnostics,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def front_to_plot_data(front: ParetoFront) -> str:
    """Two whitespace-separated columns (nb, efd), one point per line."""
    lines = ["# nb_Tk efd_GL"]
    for p in front.points:
        lines.append(f"{p.nb!r} {p.efd!r}")
    return "\n".join(lines) + "\n"
