"""Bounded-variable revised simplex, dense, two-phase.

Sized for this package's programs (tens of rows and columns), so the basis
is refactorized from scratch every iteration with a dense solve; no product
form, no sparsity. Pricing is Dantzig (most violating reduced cost) with an
automatic switch to Bland's rule after a streak of degenerate pivots, which
guarantees termination.

Rows are normalized to '<=' / '=' with one slack column each; infeasibility
is handled by a phase-1 artificial basis. Results carry duals and reduced
costs at optimality, a certifying ray when unbounded, and the positive
artificial rows when infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_STREAK_LIMIT = 15


class SimplexError(RuntimeError):
    pass


@dataclass
class LPResult:
    status: str                      # optimal | infeasible | unbounded | iteration-limit
    x: np.ndarray | None = None      # structural variables only
    objective: float | None = None   # in the caller's sense
    duals: np.ndarray | None = None  # per normalized row
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    ray: np.ndarray | None = None            # structural part, unbounded only
    infeasible_rows: tuple[int, ...] = ()    # rows with positive artificials
    phase1_objective: float = 0.0
    trace: list[str] = None                  # per-iteration log when requested


def solve_dense_lp(c, a, senses, b, lo, hi, maximize: bool = False,
                   tol: float = 1e-9, max_iter: int = 50000,
                   collect_trace: bool = False) -> LPResult:
    """Solve min/max c.x s.t. a x (senses) b, lo <= x <= hi.

    senses entries are '<=', '>=' or '='. tol is scaled internally by the
    magnitude of the data (reduced costs by |c|, feasibility by |b|).
    collect_trace records one key=value line per simplex iteration.
    """
    c = np.asarray(c, dtype=float).copy()
    a = np.asarray(a, dtype=float).copy()
    b = np.asarray(b, dtype=float).copy()
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    m, n = a.shape if a.size else (len(b), len(c))
    a = a.reshape(m, n)
    if maximize:
        c = -c

    # normalize rows: '>=' rows are negated so everything is '<=' or '='
    senses = list(senses)
    for i, sn in enumerate(senses):
        if sn == ">=":
            a[i] *= -1.0
            b[i] *= -1.0
            senses[i] = "<="
        elif sn not in ("<=", "="):
            raise SimplexError(f"unknown row sense {sn!r}")

    # row equilibration: rows mix magnitudes (ha, GL, Tk), so feasibility
    # tolerances must be judged per row, not against one global scale
    if m:
        row_scale = np.maximum(np.abs(a).max(axis=1, initial=0.0), np.abs(b))
        row_scale = np.where(row_scale > 0.0, row_scale, 1.0)
        a /= row_scale[:, None]
        b /= row_scale

    # slacks: one per row, [0, inf) for '<=', fixed 0 for '='
    slack_hi = np.array([np.inf if sn == "<=" else 0.0 for sn in senses])
    a_std = np.hstack([a, np.eye(m)]) if m else a
    lo_std = np.concatenate([lo, np.zeros(m)])
    hi_std = np.concatenate([hi, slack_hi])
    n_std = n + m

    if np.any(lo_std > hi_std + 1e-12):
        return LPResult(status="infeasible",
                        infeasible_rows=tuple(range(m)))

    # start: every real column at a finite bound (lower preferred); rows
    # already satisfied by their slack keep the slack basic, only violated
    # rows receive a basic artificial (cuts phase-1 work substantially)
    x0 = np.where(np.isfinite(lo_std), lo_std,
                  np.where(np.isfinite(hi_std), hi_std, 0.0))
    x0[:n] = np.where(np.isfinite(lo), lo,
                      np.where(np.isfinite(hi), hi, 0.0))
    resid = b - a[:, :n] @ x0[:n] if m else np.zeros(0)
    art_sign = np.where(resid >= 0.0, 1.0, -1.0)
    a_full = np.hstack([a_std, np.diag(art_sign)]) if m else a_std
    lo_full = np.concatenate([lo_std, np.zeros(m)])
    hi_full = np.concatenate([hi_std, np.full(m, np.inf)])
    art_cols = list(range(n_std, n_std + m))

    state = _State(a_full, b, lo_full, hi_full, n_real=n_std,
                   art_cols=art_cols, tol=tol)
    state.collect_trace = collect_trace
    basis = []
    need_phase1 = False
    for i in range(m):
        slack_ok = (senses[i] == "<=" and resid[i] >= 0.0)
        if slack_ok:
            basis.append(n + i)          # slack column carries the row
        else:
            basis.append(n_std + i)      # artificial carries the violation
            if senses[i] == "=" and resid[i] == 0.0:
                pass                     # artificial basic at exactly zero
            else:
                need_phase1 = True
    state.basis = basis
    state.at_upper = {j for j in range(n_std)
                      if not np.isfinite(lo_std[j]) and np.isfinite(hi_std[j])}
    total_iter = 0
    feas_scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    phase1_obj = 0.0

    if need_phase1:
        # phase 1: minimize sum of artificials
        c1 = np.zeros(n_std + m)
        c1[art_cols] = 1.0
        state.phase = 1
        status, iters = state.run(c1, max_iter)
        total_iter += iters
        if status == "iteration-limit":
            return LPResult(status="iteration-limit", iterations=total_iter)
        x_full = state.values()
        phase1_obj = float(np.sum(x_full[art_cols]))
        if phase1_obj > tol * feas_scale * max(m, 1) * 10:
            rows = tuple(i for i in range(m)
                         if art_cols[i] in state.basis
                         and x_full[art_cols[i]] > tol * feas_scale)
            return LPResult(status="infeasible", iterations=total_iter,
                            infeasible_rows=rows or tuple(range(m)),
                            phase1_objective=phase1_obj)
        state.pivot_out_artificials()
    # artificials are frozen at zero for phase 2
    state.hi[art_cols] = 0.0

    # phase 2
    c2 = np.concatenate([c, np.zeros(m), np.zeros(m)])
    state.phase = 2
    status, iters = state.run(c2, max_iter)
    total_iter += iters
    if status == "iteration-limit":
        return LPResult(status="iteration-limit", iterations=total_iter)
    if status == "unbounded":
        ray_full = state.last_ray
        obj_sign = -1.0 if maximize else 1.0
        return LPResult(status="unbounded", iterations=total_iter,
                        ray=ray_full[:n] if ray_full is not None else None,
                        objective=(-np.inf if not maximize else np.inf) * obj_sign)

    x_full = state.values()
    x = x_full[:n]
    duals = state.duals(c2)
    redcost = c2[:n] - duals @ a
    # report duals against the caller's (unscaled, normalized-sense) rows
    duals_out = duals / row_scale if m else duals
    obj = float(c[:n] @ x) if n else 0.0
    if maximize:
        obj, redcost, duals_out = -obj, -redcost, -duals_out
    return LPResult(status="optimal", x=x, objective=obj, duals=duals_out,
                    reduced_costs=redcost, iterations=total_iter,
                    phase1_objective=phase1_obj,
                    trace=state.trace if collect_trace else None)


class _State:
    """Mutable simplex state over the full (real + slack + artificial) space."""

    def __init__(self, a, b, lo, hi, n_real, art_cols, tol):
        self.a = a
        self.b = b
        self.lo = lo
        self.hi = hi
        self.n_real = n_real          # columns eligible to enter
        self.art_cols = set(art_cols)
        self.tol = tol
        self.m, self.n_full = a.shape
        self.basis: list[int] = []
        self.at_upper: set[int] = set()
        self.last_ray: np.ndarray | None = None
        self.collect_trace = False
        self.trace: list[str] = []
        self.phase = 2
        denom = np.concatenate([[1.0], np.abs(b)]) if len(b) else [1.0]
        self.feas_scale = float(np.max(denom))

    # -- linear algebra helpers -------------------------------------------
    def _basis_matrix(self) -> np.ndarray:
        return self.a[:, self.basis]

    def values(self) -> np.ndarray:
        x = np.where(np.isfinite(self.lo), self.lo,
                     np.where(np.isfinite(self.hi), self.hi, 0.0))
        for j in self.at_upper:
            x[j] = self.hi[j]
        nb_mask = np.ones(self.n_full, dtype=bool)
        nb_mask[self.basis] = False
        rhs = self.b - self.a[:, nb_mask] @ x[nb_mask]
        try:
            xb = np.linalg.solve(self._basis_matrix(), rhs)
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular basis: {exc}") from None
        x[self.basis] = xb
        return x

    def duals(self, c) -> np.ndarray:
        cb = c[self.basis]
        try:
            return np.linalg.solve(self._basis_matrix().T, cb)
        except np.linalg.LinAlgError as exc:
            raise SimplexError(f"singular basis: {exc}") from None

    # -- main loop ----------------------------------------------------------
    def run(self, c, max_iter) -> tuple[str, int]:
        degen_streak = 0
        cost_scale = max(1.0, float(np.max(np.abs(c))))
        dtol = self.tol * cost_scale
        for it in range(1, max_iter + 1):
            x = self.values()
            y = self.duals(c)
            d = c - y @ self.a  # reduced costs
            if self.collect_trace:
                resid = float(np.abs(self.b - self.a @ x).max(initial=0.0))
                self.trace.append(
                    f"phase={self.phase} iter={it} obj={float(c @ x)!r} "
                    f"residual={resid!r}")

            bland = degen_streak >= DEGENERATE_STREAK_LIMIT
            enter, direction = self._price(d, dtol, bland)
            if enter is None:
                return "optimal", it
            step, leave_pos, leave_to = self._ratio(enter, direction, x)
            if step is None:  # unbounded
                self.last_ray = self._ray(enter, direction)
                return "unbounded", it
            degen_streak = degen_streak + 1 if step <= self.tol * 10 else 0

            if leave_pos is None:
                # bound flip: entering moves to its opposite bound
                if direction > 0:
                    self.at_upper.add(enter)
                else:
                    self.at_upper.discard(enter)
            else:
                leave = self.basis[leave_pos]
                self.basis[leave_pos] = enter
                self.at_upper.discard(enter)
                if leave_to == "upper":
                    self.at_upper.add(leave)
                else:
                    self.at_upper.discard(leave)
        return "iteration-limit", max_iter

    def _price(self, d, dtol, bland) -> tuple[int | None, int]:
        best, best_score, best_dir = None, dtol, 0
        for j in range(self.n_real):
            if j in self.basis or j in self.art_cols:
                continue
            if self.hi[j] - self.lo[j] <= 0.0:
                continue  # fixed column can never move
            if j in self.at_upper:
                if d[j] > dtol:
                    if bland:
                        return j, -1
                    if d[j] > best_score:
                        best, best_score, best_dir = j, d[j], -1
            else:
                if d[j] < -dtol:
                    if bland:
                        return j, +1
                    if -d[j] > best_score:
                        best, best_score, best_dir = j, -d[j], +1
        return best, best_dir

    def _ratio(self, enter, direction, x):
        """Largest step t for the entering column; returns (t, leave_pos,
        leave_bound) with leave_pos None for a bound flip."""
        w = np.linalg.solve(self._basis_matrix(), self.a[:, enter])
        best_t = self.hi[enter] - self.lo[enter]  # own-range bound flip
        leave_pos, leave_to = None, None
        for k, jb in enumerate(self.basis):
            rate = direction * w[k]  # x_B[k] moves by -rate * t
            if rate > self.tol:
                limit = (x[jb] - self.lo[jb]) / rate
                to = "lower"
            elif rate < -self.tol:
                if not np.isfinite(self.hi[jb]):
                    continue
                limit = (self.hi[jb] - x[jb]) / (-rate)
                to = "upper"
            else:
                continue
            limit = max(limit, 0.0)
            if limit < best_t - self.tol * 10 or (
                    leave_pos is None and limit <= best_t):
                best_t, leave_pos, leave_to = limit, k, to
        if not np.isfinite(best_t):
            return None, None, None
        return best_t, leave_pos, leave_to

    def _ray(self, enter, direction) -> np.ndarray:
        ray = np.zeros(self.n_full)
        ray[enter] = direction
        w = np.linalg.solve(self._basis_matrix(), self.a[:, enter])
        for k, jb in enumerate(self.basis):
            ray[jb] = -direction * w[k]
        return ray

    def pivot_out_artificials(self):
        """After phase 1, swap zero-valued basic artificials for real columns
        where a pivot exists; redundant rows keep their artificial at zero."""
        x = self.values()
        binv = np.linalg.inv(self._basis_matrix())
        for pos in range(self.m):
            jb = self.basis[pos]
            if jb not in self.art_cols:
                continue
            if abs(x[jb]) > self.tol * self.feas_scale * 10:
                continue  # should not happen when phase 1 reached zero
            row = binv[pos]
            swapped = False
            for j in range(self.n_real):
                if j in self.basis or self.hi[j] - self.lo[j] <= 0.0:
                    continue
                if abs(row @ self.a[:, j]) > 1e-7:
                    self.basis[pos] = j
                    self.at_upper.discard(j)
                    binv = np.linalg.inv(self._basis_matrix())
                    swapped = True
                    break
            if not swapped:
                pass  # redundant row; artificial stays basic at zero
