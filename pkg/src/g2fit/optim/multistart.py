"""Seeded multi-start maximisation over a model's parameter box.

Optimisation runs in unit-box coordinates: linear parameters are mapped
affinely onto ``[0, 1]`` and log-scaled ones (rates, widths) logarithmically,
so every restart sees a well-conditioned box regardless of physical units.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..errors import ConfigurationError, ValidationError
from ..models import DelayGrid, ModelSpec
from .powell import PowellResult, powell_minimize
from .settings import OptimizerSettings

GUESS_STRATEGIES = ("uniform", "lhs")


@dataclass(frozen=True)
class MultiStartPlan:
    restarts: int = 64
    seed: int = 0
    guess_strategy: str = "uniform"
    keep_top: int = 5

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigurationError("restarts must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.guess_strategy not in GUESS_STRATEGIES:
            raise ConfigurationError(f"guess_strategy must be one of {GUESS_STRATEGIES}")
        if self.keep_top < 0:
            raise ConfigurationError("keep_top must be >= 0")


@dataclass
class RestartRecord:
    index: int
    guess: np.ndarray
    final_value: float
    iterations: int
    converged: bool
    theta: Optional[np.ndarray] = None  # kept for the top ``keep_top`` restarts only


@dataclass
class FitResult:
    theta_hat: np.ndarray
    objective_value: float
    objective_kind: str
    restart_records: List[RestartRecord]
    fitted_curve: np.ndarray
    total_photons: int
    wall_time: float
    converged: bool
    names: List[str] = field(default_factory=list)
    grid: Optional[DelayGrid] = None

    def as_dict(self) -> dict:
        return dict(zip(self.names, map(float, self.theta_hat)))


class UnitBox:
    """Bijection between a model's parameter box and ``[0, 1]^d``."""

    def __init__(self, spec: ModelSpec):
        self.lower = spec.lower
        self.upper = spec.upper
        self.log = spec.log_mask
        self._lo = np.where(self.log, np.log(np.where(self.log, self.lower, 1.0)), self.lower)
        self._hi = np.where(self.log, np.log(np.where(self.log, self.upper, 1.0)), self.upper)
        self._span = self._hi - self._lo
        self._log_idx = np.flatnonzero(self.log)

    def to_theta(self, u: np.ndarray) -> np.ndarray:
        theta = self._lo + u * self._span
        theta[..., self._log_idx] = np.exp(theta[..., self._log_idx])
        return np.minimum(np.maximum(theta, self.lower), self.upper)

    def to_unit(self, theta: np.ndarray) -> np.ndarray:
        z = np.array(theta, dtype=float)
        i = self._log_idx
        z[..., i] = np.log(np.maximum(z[..., i], self.lower[i]))
        return np.clip((z - self._lo) / self._span, 0.0, 1.0)


def draw_guesses(spec: ModelSpec, plan: MultiStartPlan) -> np.ndarray:
    """Initial guesses (restarts x d, physical units) from the plan's seeded stream."""
    rng = np.random.default_rng(plan.seed)
    d = len(spec.layout)
    if plan.guess_strategy == "uniform":
        u = rng.random((plan.restarts, d))
    else:
        strata = np.stack([rng.permutation(plan.restarts) for _ in range(d)], axis=1)
        u = (strata + rng.random((plan.restarts, d))) / plan.restarts
    box = UnitBox(spec)
    return np.array([box.to_theta(row) for row in u])


def worker_count(threads: Optional[int] = None) -> int:
    """``threads`` if given, else ``G2FIT_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("G2FIT_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def _run_restarts(task: Callable, n: int, threads: int) -> list:
    if threads <= 1 or n == 1:
        return [task(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, range(n)))


def _select(records: List[RestartRecord], thetas: list, keep_top: int):
    # highest value wins, ties go to the lowest restart index
    order = sorted(range(len(records)), key=lambda i: (-records[i].final_value, i))
    for rank, i in enumerate(order):
        if rank < keep_top:
            records[i].theta = thetas[i]
    return order[0]


def multistart_maximize(objective, spec: ModelSpec, plan: MultiStartPlan = MultiStartPlan(),
                        settings: OptimizerSettings = OptimizerSettings(),
                        threads: Optional[int] = None, guesses: Optional[np.ndarray] = None) -> FitResult:
    """Maximise ``objective(theta)`` with one Powell run per seeded guess.

    ``objective`` is an :class:`~g2fit.objectives.Objective` (anything with
    ``__call__``, ``curve``, ``kind`` and ``hist``). Guesses may be passed
    explicitly; otherwise they are drawn from ``plan``. Sequential and
    threaded runs return the same optimum.
    """
    t0 = time.perf_counter()
    box = UnitBox(spec)
    if guesses is None:
        guesses = draw_guesses(spec, plan)
    guesses = np.atleast_2d(np.asarray(guesses, dtype=float))

    def negated(u):
        return -objective(box.to_theta(u))

    def task(i):
        u0 = box.to_unit(guesses[i])
        try:
            return powell_minimize(negated, u0, bounds=(np.zeros_like(u0), np.ones_like(u0)), settings=settings)
        except ValidationError:
            # objective not finite at this guess; the restart is recorded as failed
            return PowellResult(u0, np.inf, 0, False, 1)

    results = _run_restarts(task, len(guesses), worker_count(threads))
    records = [RestartRecord(i, guesses[i].copy(), -float(r.fun), r.iterations, r.converged)
               for i, r in enumerate(results)]
    thetas = [box.to_theta(r.x) for r in results]
    best = _select(records, thetas, plan.keep_top)
    theta_hat = thetas[best]
    # report the objective at the returned theta exactly
    value = float(objective(theta_hat))
    records[best].final_value = value
    return FitResult(
        theta_hat=theta_hat,
        objective_value=value,
        objective_kind=objective.kind.value if hasattr(objective.kind, "value") else str(objective.kind),
        restart_records=records,
        fitted_curve=objective.curve(theta_hat),
        total_photons=objective.hist.total_photons,
        wall_time=time.perf_counter() - t0,
        converged=any(r.converged for r in records),
        names=spec.names,
        grid=objective.hist.grid,
    )
