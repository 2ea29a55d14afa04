"""Best-first branch and bound over the binary columns of a lowering.

Nodes carry bound vectors only (branching fixes a binary to 0 or 1);
every node's relaxation is solved from scratch by the dense simplex, which
is cheap at this problem size. An incumbent is sought at every node by
rounding the relaxation's binaries and re-solving with them fixed. Nodes
are pruned against incumbent - gap; with the queue exhausted the incumbent
is optimal within the requested gap (exactly, when gap is 0).

The trace log is machine-parseable, one "key=value ..." line per node.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .simplex import LPResult, solve_dense_lp

INT_TOL = 1e-7


@dataclass
class MilpResult:
    status: str                    # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None = None
    objective: float | None = None  # incumbent value, caller's sense
    bound: float | None = None      # best proven bound, caller's sense
    nodes: int = 0
    gap: float = 0.0
    iterations: int = 0             # total simplex iterations
    trace: list[str] = field(default_factory=list)


def _relative_gap(incumbent: float, bound: float) -> float:
    return abs(incumbent - bound) / max(1.0, abs(incumbent))


def solve_dense_milp(c, a, senses, b, lo, hi, int_mask,
                     maximize: bool = False, gap: float = 1e-6,
                     node_limit: int = 10000,
                     tol: float = 1e-9) -> MilpResult:
    """Solve the MILP; int_mask marks the binary columns.

    Internally minimizes (sign-flip for maximize); reported objective and
    bound are in the caller's sense.
    """
    c = np.asarray(c, dtype=float)
    int_idx = np.flatnonzero(np.asarray(int_mask, dtype=bool))
    sign = -1.0 if maximize else 1.0

    def solve_relax(lo_n, hi_n) -> LPResult:
        return solve_dense_lp(sign * c, a, senses, b, lo_n, hi_n,
                              maximize=False, tol=tol)

    lo0 = np.asarray(lo, dtype=float).copy()
    hi0 = np.asarray(hi, dtype=float).copy()
    root = solve_relax(lo0, hi0)
    if root.status == "infeasible":
        return MilpResult(status="infeasible", nodes=1,
                          trace=["node=0 status=infeasible"])
    if root.status == "unbounded":
        return MilpResult(status="unbounded", nodes=1,
                          trace=["node=0 status=unbounded"])

    incumbent_val: float | None = None
    incumbent_x: np.ndarray | None = None
    counter = 0
    # heap of (relaxation bound, tiebreak, lo, hi, relaxation result)
    heap = [(root.objective, counter, lo0, hi0, root)]
    nodes = 0
    trace: list[str] = []
    total_iter = root.iterations

    def try_incumbent(x_relax, lo_n, hi_n):
        nonlocal incumbent_val, incumbent_x, total_iter
        z = np.round(x_relax[int_idx])
        lo_f, hi_f = lo_n.copy(), hi_n.copy()
        lo_f[int_idx] = z
        hi_f[int_idx] = z
        r = solve_relax(lo_f, hi_f)
        total_iter += r.iterations
        if r.status == "optimal" and (incumbent_val is None
                                      or r.objective < incumbent_val - 0.0):
            incumbent_val = r.objective
            incumbent_x = r.x

    while heap:
        bound, _, lo_n, hi_n, relax = heapq.heappop(heap)
        nodes += 1
        if nodes > node_limit:
            nodes -= 1
            heapq.heappush(heap, (bound, 0, lo_n, hi_n, relax))
            break
        if incumbent_val is not None and bound >= incumbent_val - gap * max(
                1.0, abs(incumbent_val)):
            trace.append(f"node={nodes} bound={sign*bound!r} pruned=1")
            continue

        frac = np.abs(relax.x[int_idx] - np.round(relax.x[int_idx]))
        if frac.size == 0 or frac.max() <= INT_TOL:
            # integral relaxation: candidate (and exact bound for this node)
            if incumbent_val is None or relax.objective < incumbent_val:
                incumbent_val = relax.objective
                incumbent_x = relax.x
            trace.append(f"node={nodes} bound={sign*bound!r} "
                         f"incumbent={sign*incumbent_val!r} integral=1")
            continue

        try_incumbent(relax.x, lo_n, hi_n)
        inc_txt = "none" if incumbent_val is None else repr(sign * incumbent_val)
        j = int(int_idx[int(np.argmax(frac))])
        trace.append(f"node={nodes} bound={sign*bound!r} incumbent={inc_txt} "
                     f"branch_col={j}")

        for fix in (0.0, 1.0):
            lo_c, hi_c = lo_n.copy(), hi_n.copy()
            lo_c[j] = fix
            hi_c[j] = fix
            child = solve_relax(lo_c, hi_c)
            total_iter += child.iterations
            if child.status != "optimal":
                continue
            if incumbent_val is not None and child.objective >= \
                    incumbent_val - gap * max(1.0, abs(incumbent_val)):
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, lo_c, hi_c, child))

    if incumbent_val is None:
        if heap:
            return MilpResult(status="iteration-limit", nodes=nodes,
                              trace=trace, iterations=total_iter)
        return MilpResult(status="infeasible", nodes=nodes, trace=trace,
                          iterations=total_iter)

    best_open = min((h[0] for h in heap), default=incumbent_val)
    proven = min(best_open, incumbent_val)
    final_gap = _relative_gap(incumbent_val, proven)
    status = "optimal" if not heap or final_gap <= gap else "iteration-limit"
    trace.append(f"final incumbent={sign*incumbent_val!r} "
                 f"bound={sign*proven!r} gap={final_gap!r} nodes={nodes}")
    return MilpResult(status=status, x=incumbent_x,
                      objective=sign * incumbent_val, bound=sign * proven,
                      nodes=nodes, gap=final_gap, trace=trace,
                      iterations=total_iter)
