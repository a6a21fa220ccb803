"""Numerical solver for backward SDEs with mean-field interaction through a measure flow."""
from .driver import DriverSpec, eval_driver, eval_h, heavy_drift
from .measure import DiscreteMeasure, MeasureFamily, MeasureFlow, pushforward, quantize, second_moment
from .solver import (PicardReport, SolutionField, SolverConfig, conditional_expectation, linear_bsde_solve,
                     picard_iterate, solve_heavy, solve_light, uniqueness_probe)
from .stochastic import BrownianEnsemble, TerminalField, TimeGrid, eval_terminal, simulate_paths
from .transport import Coupling, optimal_coupling, wasserstein_0, wasserstein_1d, wasserstein_p

__version__ = "0.1.0"
