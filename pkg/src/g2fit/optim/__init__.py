from .brent import LineMin, bracket_minimum, brent_line_min
from .lm import LMResult, forward_jacobian, levenberg_marquardt, multistart_lsq
from .multistart import (FitResult, MultiStartPlan, RestartRecord, UnitBox, draw_guesses,
                         multistart_maximize, worker_count)
from .powell import PowellResult, powell_minimize
from .settings import OptimizerSettings

__all__ = [
    "LineMin", "bracket_minimum", "brent_line_min",
    "LMResult", "forward_jacobian", "levenberg_marquardt", "multistart_lsq",
    "FitResult", "MultiStartPlan", "RestartRecord", "UnitBox", "draw_guesses",
    "multistart_maximize", "worker_count",
    "PowellResult", "powell_minimize",
    "OptimizerSettings",
]
