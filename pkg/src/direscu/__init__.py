"""Two-region stochastic climate-economy model with cooperative and feedback-Nash solvers."""

__version__ = "0.1.0"

from .approx import Box, Domain, ValueFunctionApprox, fit  # noqa: E402
from .calibration import CalibrationResult, CalibrationTarget, calibrate  # noqa: E402
from .climate import ClimateParams  # noqa: E402
from .config import ScenarioConfig, load_config, save_config  # noqa: E402
from .dp_sp import PlannerSolution, backward_induction_sp, solve_node_sp  # noqa: E402
from .economy import EconomyParams  # noqa: E402
from .errors import (ApproximationError, ConfigError, DirescuError, DomainError,  # noqa: E402
                     InfeasibleControlError, SingularSystemError, SolverError)
from .game_fbne import GameSolution, backward_induction_fbne, solve_lq_game, solve_node_fbne  # noqa: E402
from .model import Model, StateVector, Toggles  # noqa: E402
from .policy_metrics import fan_chart, scc_fbne, scc_sp, simulate  # noqa: E402
from .preferences import Preferences  # noqa: E402

__all__ = [
    "ApproximationError", "Box", "CalibrationResult", "CalibrationTarget", "ClimateParams", "ConfigError",
    "DirescuError", "Domain", "DomainError", "EconomyParams", "GameSolution", "InfeasibleControlError", "Model",
    "PlannerSolution", "Preferences", "ScenarioConfig", "SingularSystemError", "SolverError", "StateVector",
    "Toggles", "ValueFunctionApprox", "backward_induction_fbne", "backward_induction_sp", "calibrate", "fan_chart",
    "fit", "load_config", "save_config", "scc_fbne", "scc_sp", "simulate", "solve_lq_game", "solve_node_fbne",
    "solve_node_sp",
]
