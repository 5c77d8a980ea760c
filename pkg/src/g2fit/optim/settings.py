from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigurationError


@dataclass(frozen=True)
class OptimizerSettings:
    xtol: float = 1e-6
    ftol: float = 1e-8
    max_iters: int = 200
    max_line_evals: int = 100

    def __post_init__(self):
        if not (self.xtol > 0 and self.ftol > 0 and self.max_line_evals > 0):
            raise ConfigurationError("optimizer tolerances and budgets must be positive")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
