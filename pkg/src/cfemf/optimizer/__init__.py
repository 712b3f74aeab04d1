"""Model-based power control: barrier solver, DL SCO (bisection and LSE), UL bisection."""

from .barrier import (ConvexSubproblem, QuadraticConstraints, SolverFailure, barrier_solve,
                      linear_objective)
from .common import AllocationResult, SolverConfig, rate_from_sinr, sinr_target_from_rate
from .downlink import (AffineBound, DownlinkProblem, FeasibilityStep, dl_feasibility_step,
                       dl_lse_sco, dl_maximin_bisection, initial_point, lse_objective,
                       lse_value, taylor_lower_bound)
from .uplink import (UplinkTarget, fixed_point_iterates, ul_caps, ul_maximin_bisection,
                     ul_target_feasible)

__all__ = [
    "AffineBound", "AllocationResult", "ConvexSubproblem", "DownlinkProblem",
    "FeasibilityStep", "QuadraticConstraints", "SolverConfig", "SolverFailure",
    "UplinkTarget", "barrier_solve", "dl_feasibility_step", "dl_lse_sco",
    "dl_maximin_bisection", "fixed_point_iterates", "initial_point", "linear_objective",
    "lse_objective", "lse_value", "rate_from_sinr", "sinr_target_from_rate",
    "taylor_lower_bound", "ul_caps", "ul_maximin_bisection", "ul_target_feasible",
]
