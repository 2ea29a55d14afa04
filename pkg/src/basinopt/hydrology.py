"""Decision evaluation: water balances, both objectives, feasibility.

Decision variables are the planted area per crop (ha) and the environmental
flow left in the river per month (GL). Everything else is derived:

    allocation_m = max(inflow_m - env_flow_m, 0)          surface water taken
    requirement_m = crop water demand under the active clamp mode
    pumping_m    = max(requirement_m - allocation_m, 0)   groundwater makeup
    tef_m        = tef_fraction_m * inflow_m              environmental target

The net-benefit objective (maximized) is crop revenue minus surface
conveyance cost on the water actually drawn from the river, minus pumping
cost, minus variable costs. The deficiency objective (minimized) is the
summed shortfall of env_flow below tef.

A "legacy" evaluation mode reproduces the historical formulation in which
pumping is the signed residual requirement - allocation. When a month has
surplus water (requirement below allocation) that formulation books the
negative pumping as revenue; it exists here only as a diagnostic and is
never handed to a solver.

All functions are pure; none mutate their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import CLAMP_MODES, N_MONTHS, Scenario


@dataclass(frozen=True)
class DecisionVector:
    """Crop areas (ha) keyed by crop name, and 12 monthly env flows (GL)."""

    areas: dict[str, float]
    env_flow: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "env_flow",
                           tuple(float(v) for v in self.env_flow))
        if len(self.env_flow) != N_MONTHS:
            raise ValueError(
                f"env_flow has {len(self.env_flow)} entries, expected 12")

    def area_vector(self, s: Scenario) -> np.ndarray:
        """Areas ordered like s.crops; every scenario crop must be present."""
        try:
            return np.array([float(self.areas[name])
                             for name in s.crop_names()])
        except KeyError as exc:
            raise ValueError(f"decision has no area for crop {exc}") from None


def decision_from_arrays(s: Scenario, areas, env_flow) -> DecisionVector:
    areas = np.asarray(areas, dtype=float)
    if areas.shape != (len(s.crops),):
        raise ValueError(f"areas shape {areas.shape} does not match "
                         f"{len(s.crops)} crops")
    return DecisionVector(areas=dict(zip(s.crop_names(), areas.tolist())),
                          env_flow=tuple(np.asarray(env_flow, dtype=float)))


@dataclass(frozen=True)
class DerivedFlows:
    """Monthly series (GL) implied by a decision; requirement is per the
    clamp mode it was computed with."""

    requirement: tuple[float, ...]
    allocation: tuple[float, ...]
    pumping: tuple[float, ...]
    tef: tuple[float, ...]


def demand_coefficients(s: Scenario, year: str) -> np.ndarray:
    """Per-crop, per-month net demand depth kc*et0 - rainfall (GL/ha).

    Shape (n_crops, 12). Negative entries mean rain exceeds that crop's
    demand in that month.
    """
    y = s.year(year)
    et = np.asarray(y.et0)
    rain = np.asarray(y.rainfall)
    kc = np.array([c.kc for c in s.crops])
    return kc * et[None, :] - rain[None, :]


def monthly_requirement(s: Scenario, year: str, areas,
                        clamp: str | None = None) -> np.ndarray:
    """Crop water requirement per month (GL) under a clamp mode.

    clamp=None uses the scenario's option. "none" returns the signed
    aggregate, "monthly" clamps the aggregate at zero, "per_crop" clamps
    each crop's demand at zero before aggregating.
    """
    clamp = s.options.requirement_clamp if clamp is None else clamp
    if clamp not in CLAMP_MODES:
        raise ValueError(f"unknown clamp mode {clamp!r}")
    coef = demand_coefficients(s, year)
    areas = np.asarray(areas, dtype=float)
    if areas.shape != (coef.shape[0],):
        raise ValueError(f"areas shape {areas.shape} does not match "
                         f"{coef.shape[0]} crops")
    if clamp == "per_crop":
        return np.maximum(coef, 0.0).T @ areas
    w = coef.T @ areas
    return np.maximum(w, 0.0) if clamp == "monthly" else w


def derive_flows(s: Scenario, year: str, d: DecisionVector,
                 clamp: str | None = None) -> DerivedFlows:
    """All decision-dependent monthly series for one year type."""
    y = s.year(year)
    inflow = np.asarray(y.inflow)
    env = np.asarray(d.env_flow, dtype=float)
    areas = d.area_vector(s)
    req = monthly_requirement(s, year, areas, clamp)
    alloc = np.maximum(inflow - env, 0.0)
    pump = np.maximum(req - alloc, 0.0)
    return DerivedFlows(
        requirement=tuple(req),
        allocation=tuple(alloc),
        pumping=tuple(pump),
        tef=y.tef(),
    )


def eval_net_benefit(s: Scenario, year: str, d: DecisionVector,
                     mode: str = "extended",
                     clamp: str | None = None) -> float:
    """Net benefit in Tk.

    mode="extended" (default): pumping clamped at zero, requirement per the
    clamp mode; this is the objective the solvers optimize.
    mode="legacy": the historical signed-pumping formulation, diagnostic
    only (overstates benefit whenever allocation exceeds requirement).
    """
    y = s.year(year)
    inflow = np.asarray(y.inflow)
    env = np.asarray(d.env_flow, dtype=float)
    areas = d.area_vector(s)
    revenue = sum(c.price * c.crop_yield * a for c, a in zip(s.crops, areas))
    varcost = sum(c.var_cost * a for c, a in zip(s.crops, areas))
    alloc = np.maximum(inflow - env, 0.0)

    if mode == "extended":
        req = monthly_requirement(s, year, areas, clamp)
        pump = np.maximum(req - alloc, 0.0)
    elif mode == "legacy":
        req = monthly_requirement(s, year, areas, clamp="none")
        pump = req - alloc  # signed; negative values book phantom revenue
    else:
        raise ValueError(f"unknown mode {mode!r}")

    surface_cost = s.economics.cw * float(np.sum(req - pump))
    pump_cost = s.economics.cp * float(np.sum(pump))
    return float(revenue - surface_cost - pump_cost - varcost)


def eval_efd(s: Scenario, year: str, d: DecisionVector) -> float:
    """Environmental flow deficiency in GL: sum of max(tef - env_flow, 0)."""
    y = s.year(year)
    tef = np.asarray(y.tef())
    env = np.asarray(d.env_flow, dtype=float)
    return float(np.sum(np.maximum(tef - env, 0.0)))


# ---------------------------------------------------------------------------
# feasibility

CONSTRAINT_FAMILIES = ("pumping_total", "min_area", "total_area",
                       "env_flow_le_inflow", "canal_capacity", "nonnegative")


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    slacks: dict[str, tuple[float, ...]]  # family -> per-item slack (>= 0 ok)
    violations: tuple[str, ...]           # families with a negative slack

    def worst(self, family: str) -> float:
        return min(self.slacks[family])


def check_feasible(s: Scenario, year: str, d: DecisionVector,
                   tol: float = 1e-6,
                   clamp: str | None = None) -> FeasibilityVerdict:
    """Check the full constraint set; slacks are reported per family.

    tol is relative to each constraint's own scale (the pumping cap for the
    pumping family, each crop's minimum for minimum areas, and so on), since
    the families mix GL and ha magnitudes.
    """
    y = s.year(year)
    inflow = np.asarray(y.inflow)
    env = np.asarray(d.env_flow, dtype=float)
    areas = d.area_vector(s)
    flows = derive_flows(s, year, d, clamp)

    def scale(x):
        return max(abs(x), 1.0)

    slacks: dict[str, tuple[float, ...]] = {}
    violated: list[str] = []

    def record(family, pairs):
        vals = tuple(v for v, _ in pairs)
        slacks[family] = vals
        if any(v < -tol * sc for v, sc in pairs):
            violated.append(family)

    record("pumping_total",
           [(s.limits.t_pump - float(np.sum(flows.pumping)),
             scale(s.limits.t_pump))])
    record("min_area",
           [(a - c.min_area, scale(c.min_area))
            for a, c in zip(areas, s.crops)])
    record("total_area",
           [(s.limits.t_area - float(np.sum(areas)), scale(s.limits.t_area))])
    record("env_flow_le_inflow",
           [(q - e, scale(q)) for q, e in zip(inflow, env)])
    record("canal_capacity",
           [(s.limits.canal_cap - (q - e), scale(s.limits.canal_cap))
            for q, e in zip(inflow, env)])
    record("nonnegative",
           [(a, scale(c.min_area)) for a, c in zip(areas, s.crops)]
           + [(e, scale(q)) for e, q in zip(env, inflow)])

    return FeasibilityVerdict(feasible=not violated, slacks=slacks,
                              violations=tuple(violated))
