"""Smoothed multi-start projected gradient: the cross-check solver.

Works on the original nonsmooth problem, not the lowering. Every
max(v, 0) is replaced by the softplus approximation mu*log(1+exp(v/mu))
under a decreasing mu continuation schedule (three stages, divide by ten),
so each stage is a smooth concave maximization / convex minimization whose
projected gradient iterates converge from any start.

Constraint handling: the area simplex {X >= min, sum X <= T_area} and the
env-flow box [max(0, inflow - canal_cap), inflow] are handled by exact
Euclidean projection; the pumping cap and (for subproblems) the
scalarization inequality enter as quadratic penalties whose weight grows
each stage, with a final exact repair step that removes any residual
penalty bias on the pumping cap.

Starts are drawn deterministically from the seed: areas uniform on
[min, min + spare/n_crops], flows uniform on the box. The reported result
is the best start by the exact (unsmoothed) objective, ties broken by
lowest start index; its status is always "local-only" because nothing here
certifies global optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import F1_SCALE, F2_SCALE, ProblemSpec
from .engine import SolveReport
from .hydrology import (check_feasible, decision_from_arrays,
                        demand_coefficients, eval_efd, eval_net_benefit)


@dataclass(frozen=True)
class SmoothingSchedule:
    mu0_factor: float = 1e-2   # initial mu = factor * per-term scale
    shrink: float = 0.1        # mu multiplier per continuation stage
    stages: int = 3
    max_iter: int = 400        # projected-gradient iterations per stage
    penalty0: float = 10.0     # initial quadratic penalty weight (scaled)
    penalty_growth: float = 10.0  # penalty multiplier per stage
    grad_tol: float = 1e-9


def _softplus(v, mu):
    z = v / mu
    out = np.where(z > 35.0, v, np.where(z < -35.0, 0.0,
                   mu * np.log1p(np.exp(np.clip(z, -35.0, 35.0)))))
    return out


def _sigmoid(v, mu):
    z = np.clip(v / mu, -35.0, 35.0)
    return 1.0 / (1.0 + np.exp(-z))


class _Smoothed:
    """Smoothed objective/penalty evaluation for one problem kind."""

    def __init__(self, p: ProblemSpec):
        s = p.scenario
        y = s.year(p.year)
        self.kind = p.kind
        self.clamp = p.clamp_mode
        self.weight = p.weight
        self.coef = demand_coefficients(s, p.year)       # (n_crops, 12)
        self.coef_pos = np.maximum(self.coef, 0.0)
        self.inflow = np.asarray(y.inflow)
        self.tef = np.asarray(y.tef())
        self.margins = np.array([c.gross_margin() for c in s.crops])
        self.mins = np.array(s.min_areas())
        self.e_lo = np.maximum(self.inflow - s.limits.canal_cap, 0.0)
        self.t_area = s.limits.t_area
        self.t_pump = s.limits.t_pump
        self.cw, self.cp = s.economics.cw, s.economics.cp
        # per-term scales for the smoothing parameter
        spare = max(self.t_area - self.mins.sum(), 0.0)
        req_hi = self.coef_pos.T @ self.mins + spare * self.coef_pos.max(axis=0)
        self.scale_t = np.maximum(np.maximum(req_hi, self.inflow), 1.0)
        self.scale_s = np.maximum(self.tef, 1.0)
        self.scale_w = np.maximum(req_hi, 1.0)
        # objective magnitudes; penalties are scaled to these so that a
        # capacity violation always outweighs the economic gradient
        self.mag_f1 = max(1.0, float(np.abs(self.margins) @ self.mins
                                     + spare * max(np.max(np.abs(self.margins)),
                                                   1.0)))
        self.mag_f2 = max(1.0, float(self.tef.sum()))

    def _penalty_scale(self) -> float:
        if self.kind == "model1":
            return self.mag_f1
        if self.kind == "model2":
            return self.mag_f2
        w = self.weight
        return max(1.0, w.w1 * F1_SCALE * self.mag_f1,
                   w.w2 * F2_SCALE * self.mag_f2)

    # -- smooth pieces ------------------------------------------------------
    def _requirement(self, x, mu):
        """Smoothed requirement per month and its X-jacobian weights."""
        if self.clamp == "per_crop":
            return self.coef_pos.T @ x, self.coef_pos, None
        w = self.coef.T @ x
        if self.clamp == "none":
            return w, self.coef, None
        mu_w = mu * self.scale_w
        sig = _sigmoid(w, mu_w)
        return _softplus(w, mu_w), self.coef, sig

    def f1_smooth(self, x, e, mu):
        req, dreq, sig_w = self._requirement(x, mu)
        arg = req - (self.inflow - e)
        mu_t = mu * self.scale_t
        pump = _softplus(arg, mu_t)
        sig_t = _sigmoid(arg, mu_t)
        value = float(self.margins @ x - self.cw * req.sum()
                      + (self.cw - self.cp) * pump.sum())
        w_x = (-self.cw + (self.cw - self.cp) * sig_t)
        if sig_w is not None:
            w_x = w_x * sig_w
        gx = self.margins + dreq @ w_x
        ge = (self.cw - self.cp) * sig_t
        return value, gx, ge, pump, sig_t, dreq, sig_w

    def f2_smooth(self, e, mu):
        arg = self.tef - e
        mu_s = mu * self.scale_s
        value = float(_softplus(arg, mu_s).sum())
        ge = -_sigmoid(arg, mu_s)
        return value, ge

    # -- composite objective (minimize) --------------------------------------
    def eval(self, x, e, mu, rho):
        gx = np.zeros_like(x)
        ge = np.zeros_like(e)
        if self.kind in ("model1", "sub1", "sub2"):
            f1, g1x, g1e, pump, sig_t, dreq, sig_w = self.f1_smooth(x, e, mu)
        if self.kind in ("model2", "sub1", "sub2"):
            f2, g2e = self.f2_smooth(e, mu)

        if self.kind == "model1":
            val = -f1
            gx += -g1x
            ge += -g1e
        elif self.kind == "model2":
            val = f2
            ge += g2e
        elif self.kind == "sub1":
            w = self.weight
            val = -w.w1 * F1_SCALE * f1
            gx += -w.w1 * F1_SCALE * g1x
            ge += -w.w1 * F1_SCALE * g1e
            g = w.w2 * F2_SCALE * f2 - w.w1 * F1_SCALE * f1
            if g > 0.0:
                val += rho * g * g
                gx += rho * 2 * g * (-w.w1 * F1_SCALE * g1x)
                ge += rho * 2 * g * (w.w2 * F2_SCALE * g2e
                                     - w.w1 * F1_SCALE * g1e)
        elif self.kind == "sub2":
            w = self.weight
            val = w.w2 * F2_SCALE * f2
            ge += w.w2 * F2_SCALE * g2e
            g = w.w1 * F1_SCALE * f1 - w.w2 * F2_SCALE * f2
            if g > 0.0:
                val += rho * g * g
                gx += rho * 2 * g * (w.w1 * F1_SCALE * g1x)
                ge += rho * 2 * g * (-w.w1 * F1_SCALE * g1e +
                                     -w.w2 * F2_SCALE * g2e)
        else:
            raise ValueError(f"unsupported kind {self.kind!r}")

        # pumping-cap penalty (shared by every kind)
        if self.kind in ("model1", "sub1", "sub2"):
            viol = pump.sum() - self.t_pump
        else:
            req, dreq, sig_w = self._requirement(x, mu)
            arg = req - (self.inflow - e)
            mu_t = mu * self.scale_t
            pump = _softplus(arg, mu_t)
            sig_t = _sigmoid(arg, mu_t)
            viol = pump.sum() - self.t_pump
        if viol > 0.0:
            scale = 1.0 / max(self.t_pump, 1.0)
            pscale = self._penalty_scale()
            val += rho * pscale * (viol * scale) ** 2
            w_x = sig_t if sig_w is None else sig_t * sig_w
            gx += rho * pscale * 2 * viol * scale * scale * (dreq @ w_x)
            ge += rho * pscale * 2 * viol * scale * scale * sig_t
        return val, gx, ge


def solve_smoothed_multistart(p: ProblemSpec, n_starts: int = 20,
                              seed: int = 0,
                              schedule: SmoothingSchedule | None = None
                              ) -> SolveReport:
    """Best local solution over n_starts seeded projected-gradient runs."""
    import time
    t0 = time.perf_counter()
    sched = schedule or SmoothingSchedule()
    sm = _Smoothed(p)
    s = p.scenario
    spare = max(sm.t_area - sm.mins.sum(), 0.0)
    width = spare / max(len(sm.mins), 1)

    best = None  # (objective key, start index, x, e, nb, efd)
    best_infeas = None
    maximize = p.kind in ("model1", "sub1")

    for start in range(n_starts):
        rng = np.random.default_rng((seed, start))
        x = sm.mins + rng.uniform(0.0, 1.0, len(sm.mins)) * width
        e = sm.e_lo + rng.uniform(0.0, 1.0, 12) * (sm.inflow - sm.e_lo)
        x, e = _run_one(sm, x, e, sched)

        d = decision_from_arrays(s, x, e)
        verdict = check_feasible(s, p.year, d, clamp=p.clamp)
        nb = eval_net_benefit(s, p.year, d, clamp=p.clamp)
        efd = eval_efd(s, p.year, d)
        exact = nb if p.kind in ("model1", "sub1") else efd
        key = -exact if maximize else exact
        if verdict.feasible:
            if best is None or key < best[0] - 0.0:
                best = (key, start, x, e, nb, efd)
        else:
            worst = min(min(v) for v in verdict.slacks.values())
            if best_infeas is None or worst > best_infeas[0]:
                best_infeas = (worst, start, x, e, nb, efd)

    wall = time.perf_counter() - t0
    if best is None:
        report = SolveReport(status="infeasible",
                             solver_id="smoothed-multistart", wall_time=wall)
        if best_infeas is not None:
            _, start, x, e, nb, efd = best_infeas
            report.decision = decision_from_arrays(s, x, e)
            report.nb, report.efd = nb, efd
            report.meta = {"best_infeasibility": best_infeas[0],
                           "start": start}
        return report

    key, start, x, e, nb, efd = best
    report = SolveReport(status="local-only", solver_id="smoothed-multistart",
                         wall_time=wall,
                         objective=nb if maximize else efd,
                         nb=nb, efd=efd,
                         decision=decision_from_arrays(s, x, e),
                         meta={"start": start, "n_starts": n_starts,
                               "seed": seed})
    return report


def _run_one(sm: _Smoothed, x, e, sched: SmoothingSchedule):
    """Continuation loop in normalized coordinates.

    Areas are expressed as mins + spare * xi with xi on the simplex
    {xi >= 0, sum xi <= 1}; flows as e_lo + eta * (inflow - e_lo) with eta
    in the unit box. That puts every variable and every gradient on an O(1)
    scale regardless of the instance's ha/GL/Tk magnitudes.
    """
    spare = max(sm.t_area - sm.mins.sum(), 0.0)
    e_width = np.maximum(sm.inflow - sm.e_lo, 0.0)
    xi = (x - sm.mins) / spare if spare > 0 else np.zeros_like(x)
    eta = np.where(e_width > 0, (e - sm.e_lo) / np.where(e_width > 0, e_width, 1.0), 0.0)

    def to_xe(xi, eta):
        return sm.mins + spare * xi, sm.e_lo + eta * e_width

    rho = sched.penalty0
    mu = sched.mu0_factor
    norm = None
    for stage in range(sched.stages):
        x0, e0 = to_xe(xi, eta)
        val0, _, _ = sm.eval(x0, e0, mu, rho)
        if norm is None:
            norm = max(1.0, abs(val0))
        xi, eta = _projected_gradient(sm, xi, eta, to_xe, spare, e_width,
                                      mu, rho, norm, sched)
        mu *= sched.shrink
        rho *= sched.penalty_growth
    x, e = to_xe(xi, eta)
    return _repair_pump_cap(sm, x, e)


def _exact_total_pumping(sm: _Smoothed, x, e) -> float:
    if sm.clamp == "per_crop":
        req = sm.coef_pos.T @ x
    else:
        w = sm.coef.T @ x
        req = np.maximum(w, 0.0) if sm.clamp == "monthly" else w
    return float(np.maximum(req - (sm.inflow - e), 0.0).sum())


def _repair_pump_cap(sm: _Smoothed, x, e):
    """Remove any residual quadratic-penalty bias: shrink the decision
    toward (mins, e_lo) along a straight line until exact total pumping
    respects the cap. Pumping decreases monotonically along that line, so
    bisection finds the largest feasible scale."""
    if _exact_total_pumping(sm, x, e) <= sm.t_pump:
        return x, e

    def point(t):
        return (sm.mins + t * (x - sm.mins), sm.e_lo + t * (e - sm.e_lo))

    x0, e0 = point(0.0)
    if _exact_total_pumping(sm, x0, e0) > sm.t_pump:
        return x, e  # infeasible even at the corner; report as-is
    lo_t, hi_t = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo_t + hi_t)
        xm, em = point(mid)
        if _exact_total_pumping(sm, xm, em) <= sm.t_pump:
            lo_t = mid
        else:
            hi_t = mid
    return point(lo_t)


def _project_simplex(xi):
    """Projection onto {xi >= 0, sum xi <= 1}."""
    z = np.maximum(xi, 0.0)
    if z.sum() <= 1.0:
        return z
    lo_l, hi_l = 0.0, float(np.max(xi))
    for _ in range(80):
        lam = 0.5 * (lo_l + hi_l)
        if np.maximum(xi - lam, 0.0).sum() > 1.0:
            lo_l = lam
        else:
            hi_l = lam
    return np.maximum(xi - hi_l, 0.0)


def _projected_gradient(sm, xi, eta, to_xe, spare, e_width, mu, rho, norm,
                        sched: SmoothingSchedule):
    def value_grad(xi, eta):
        x, e = to_xe(xi, eta)
        val, gx, ge = sm.eval(x, e, mu, rho)
        return val / norm, gx * spare / norm, ge * e_width / norm

    val, gxi, geta = value_grad(xi, eta)
    step = 1.0
    for _ in range(sched.max_iter):
        improved = False
        for _bt in range(60):
            xi_new = _project_simplex(xi - step * gxi)
            eta_new = np.clip(eta - step * geta, 0.0, 1.0)
            move = float(np.sum((xi_new - xi) ** 2)
                         + np.sum((eta_new - eta) ** 2))
            if move == 0.0:
                break
            val_new, gxi_new, geta_new = value_grad(xi_new, eta_new)
            if val_new <= val - 1e-4 * move / max(step, 1e-16):
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        xi, eta, val, gxi, geta = xi_new, eta_new, val_new, gxi_new, geta_new
        if move <= sched.grad_tol:
            break
        step = min(step * 2.0, 4.0)
    return xi, eta
