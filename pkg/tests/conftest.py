import numpy as np
import pytest

from basinopt.scenario import (CropSpec, CropTable, EconomicParams, HydroYear,
                               ModelOptions, Scenario, SystemLimits,
                               builtin_rajshahi)


@pytest.fixture(scope="session")
def rajshahi() -> Scenario:
    return builtin_rajshahi()


def make_desk_scenario() -> Scenario:
    """Two-crop, 12-month instance with integral optima: a rain-fed crop
    competing for land with a thirsty winter crop, pump capacity short of
    full environmental reservation. Every model/subproblem optimum sits on
    the 1 ha x 1 GL grid, so exhaustive grid search is an exact oracle."""
    crops = [
        CropSpec(name="rainfed", price=3e6, crop_yield=1.0, var_cost=0.0,
                 kc=(0.0,) * 12, min_area=2.0),
        CropSpec(name="thirsty", price=5e5, crop_yield=1.0, var_cost=0.0,
                 kc=(1.0, 1.0, 0.5) + (0.0,) * 9, min_area=3.0),
    ]
    year = HydroYear(label="dry",
                     rainfall=(0.0,) * 12,
                     et0=(2.0, 2.0, 2.0) + (0.0,) * 9,
                     inflow=(4.0, 4.0, 2.0) + (0.0,) * 9,
                     tef_fraction=(1.0,) * 4 + (0.4,) * 6 + (1.0,) * 2)
    return Scenario(crops=CropTable(crops), years={"dry": year},
                    economics=EconomicParams(cw=1e3, cp=2e3),
                    limits=SystemLimits(t_pump=7.0, t_area=10.0,
                                        canal_cap=100.0),
                    options=ModelOptions())


@pytest.fixture(scope="session")
def desk() -> Scenario:
    return make_desk_scenario()


def make_random_scenario(rng: np.random.Generator, n_crops: int = 3,
                         clamp: str = "monthly") -> Scenario:
    """Feasible-by-construction random instance for property tests.

    The pump cap is set to 1.5x the pumping needed at minimum areas with
    zero environmental flow, so the minimum-area decision is always inside
    the constraint set.
    """
    crops = []
    for i in range(n_crops):
        kc = np.zeros(12)
        start = int(rng.integers(0, 12))
        length = int(rng.integers(2, 6))
        for k in range(length):
            kc[(start + k) % 12] = float(rng.uniform(0.2, 1.8))
        crops.append(CropSpec(
            name=f"crop{i}",
            price=float(rng.uniform(1e3, 4e4)),
            crop_yield=float(rng.uniform(1.0, 20.0)),
            var_cost=float(rng.uniform(1e3, 1e5)),
            kc=tuple(kc.round(3)),
            min_area=float(rng.integers(100, 2000)),
        ))
    et0 = rng.uniform(2e-4, 20e-4, 12)
    rain = rng.uniform(0.0, 15e-4, 12)
    inflow = rng.uniform(0.0, 800.0, 12)
    frac = np.where(rng.uniform(size=12) < 0.5, 1.0,
                    rng.uniform(0.2, 0.8, 12).round(2))
    year = HydroYear(label="dry", rainfall=tuple(rain.round(7)),
                     et0=tuple(et0.round(7)), inflow=tuple(inflow.round(3)),
                     tef_fraction=tuple(frac))
    t_area = sum(c.min_area for c in crops) * float(rng.uniform(1.2, 2.5))
    mins = np.array([c.min_area for c in crops])
    coef = np.array([c.kc for c in crops]) * et0[None, :] - rain[None, :]
    if clamp == "per_crop":
        req_min = np.maximum(coef, 0.0).T @ mins
    elif clamp == "monthly":
        req_min = np.maximum(coef.T @ mins, 0.0)
    else:
        req_min = coef.T @ mins
    base_pump = float(np.maximum(req_min - inflow, 0.0).sum())
    limits = SystemLimits(t_pump=max(base_pump * 1.5, 10.0),
                          t_area=float(round(t_area, 1)),
                          canal_cap=float(rng.uniform(500.0, 2000.0)))
    return Scenario(crops=CropTable(crops), years={"dry": year},
                    economics=EconomicParams(
                        cw=float(rng.uniform(5e3, 5e4)),
                        cp=float(rng.uniform(6e4, 2e5))),
                    limits=limits,
                    options=ModelOptions(requirement_clamp=clamp))


def random_feasible_decision(s: Scenario, year: str,
                             rng: np.random.Generator):
    """A random point inside the area/flow boxes (pump cap not enforced)."""
    from basinopt.hydrology import decision_from_arrays
    mins = np.array(s.min_areas())
    spare = s.limits.t_area - mins.sum()
    frac = rng.dirichlet(np.ones(len(mins))) * rng.uniform(0.0, 1.0)
    areas = mins + spare * frac
    y = s.year(year)
    inflow = np.array(y.inflow)
    e_lo = np.maximum(inflow - s.limits.canal_cap, 0.0)
    env = e_lo + rng.uniform(0.0, 1.0, 12) * (inflow - e_lo)
    return decision_from_arrays(s, areas, env)
