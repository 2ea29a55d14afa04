"""Irrigation water allocation: economic benefit vs environmental flow.

Library layout:

- scenario:   problem instances, loading/validation, the bundled dataset
- hydrology:  decision evaluation (water balances, objectives, feasibility)
- assembly:   building the optimization problems and lowering them to LP/MILP
- simplex:    bounded-variable revised simplex
- milp:       branch and bound over the big-M lowerings
- multistart: smoothed multi-start projected gradient (cross-check solver)
- engine:     solve orchestration, certification, lexicographic tie-breaks
- pareto:     weighted-constraint subproblem driver and front assembly
- cli:        batch command-line interface
"""

from .scenario import (CropSpec, HydroYear, EconomicParams, SystemLimits,
                       ModelOptions, Scenario, ValidationReport,
                       ScenarioError, builtin_rajshahi, builtin_rajshahi_csv,
                       load_scenario, save_scenario, validate)
from .hydrology import (DecisionVector, DerivedFlows, decision_from_arrays,
                        derive_flows, eval_net_benefit, eval_efd,
                        check_feasible)
from .assembly import (ProblemSpec, WeightPair, build_problem, export_mps,
                       lower_to_lp, lower_to_milp)
from .engine import (SolveReport, certify, solve_epsilon_constraint,
                     solve_lp, solve_milp, solve_model)
from .multistart import SmoothingSchedule, solve_smoothed_multistart
from .pareto import (ParetoFront, ParetoPoint, anchors, assemble_front,
                     compute_front, generate_weights, solve_weight_pair)

__version__ = "0.1.0"

__all__ = [
    "CropSpec", "HydroYear", "EconomicParams", "SystemLimits", "ModelOptions",
    "Scenario", "ValidationReport", "ScenarioError",
    "builtin_rajshahi", "builtin_rajshahi_csv",
    "load_scenario", "save_scenario", "validate",
    "DecisionVector", "DerivedFlows", "decision_from_arrays", "derive_flows",
    "eval_net_benefit", "eval_efd", "check_feasible",
    "ProblemSpec", "WeightPair", "build_problem", "export_mps",
    "lower_to_lp", "lower_to_milp",
    "SolveReport", "certify", "solve_epsilon_constraint", "solve_lp",
    "solve_milp", "solve_model",
    "SmoothingSchedule", "solve_smoothed_multistart",
    "ParetoFront", "ParetoPoint", "anchors", "assemble_front",
    "compute_front", "generate_weights", "solve_weight_pair",
    "__version__",
]
