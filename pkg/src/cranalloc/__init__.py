"""Subcarrier, radio-head and power allocation with a per-subcarrier
duplex choice, solved by dual decomposition."""

from .scenario import Scenario, ChannelRealization, draw_channels, standard_scenario
from .rates import Allocation, check_feasibility, total_throughput, direction_rates
from .dual import SolveReport, SolverOptions, run_algorithm1, run_algorithm2, solve_tdd

__all__ = [
    "Scenario", "ChannelRealization", "draw_channels", "standard_scenario",
    "Allocation", "check_feasibility", "total_throughput", "direction_rates",
    "SolveReport", "SolverOptions", "run_algorithm1", "run_algorithm2", "solve_tdd",
]
__version__ = "0.1.0"
