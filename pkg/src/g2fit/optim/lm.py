"""Levenberg-Marquardt least squares, the baseline estimator."""

from __future__ import annotations

import time
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..errors import ValidationError
from ..models import ModelSpec
from .multistart import (FitResult, MultiStartPlan, RestartRecord, UnitBox, _run_restarts, _select,
                         draw_guesses, worker_count)
from .settings import OptimizerSettings

_MAX_DAMPING = 1e16


class LMResult(NamedTuple):
    x: np.ndarray
    cost: float  # sum of squared residuals
    iterations: int
    converged: bool
    nfev: int


def forward_jacobian(residual_fn: Callable, x: np.ndarray, r: np.ndarray, lower=None, upper=None):
    """Forward differences with step ``1e-6 (1 + |x_j|)``; steps flip sign at an upper bound."""
    J = np.empty((r.size, x.size))
    for j in range(x.size):
        h = 1e-6 * (1.0 + abs(x[j]))
        if upper is not None and x[j] + h > upper[j]:
            h = -h
        xp = x.copy()
        xp[j] += h
        J[:, j] = (residual_fn(xp) - r) / h
    return J


def levenberg_marquardt(residual_fn: Callable[[np.ndarray], np.ndarray], x0, bounds=None,
                        settings: Optional[OptimizerSettings] = None,
                        damping: float = 1e-9) -> LMResult:
    """Minimise ``sum(residual_fn(x)**2)``.

    Marquardt-scaled damping: solve ``(J'J + mu diag(J'J)) dx = -J'r``, divide
    ``mu`` by 10 after an accepted step and multiply by 10 after a rejected
    one. Box bounds, if given, are enforced by projecting each trial point.
    A linear problem is solved to rounding in two iterations.
    """
    settings = settings or OptimizerSettings()
    x = np.array(x0, dtype=float)
    lower = upper = None
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=float)
        upper = np.asarray(bounds[1], dtype=float)
        x = np.clip(x, lower, upper)
    r = np.asarray(residual_fn(x), dtype=float)
    nfev = 1
    if not np.all(np.isfinite(r)):
        raise ValidationError("residuals are not finite at x0")
    cost = float(r @ r)
    if cost == 0.0:
        return LMResult(x, 0.0, 0, True, nfev)

    cost0 = cost
    mu = damping
    it = 0
    for it in range(1, settings.max_iters + 1):
        J = forward_jacobian(residual_fn, x, r, lower, upper)
        nfev += x.size
        g = J.T @ r
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-12 * max(float(np.max(np.diag(A))), 1e-300))
        if not np.any(g):
            return LMResult(x, cost, it, True, nfev)
        while True:
            try:
                dx = np.linalg.solve(A + mu * np.diag(diag), -g)
                ok = np.all(np.isfinite(dx))
            except np.linalg.LinAlgError:
                ok = False
            if ok:
                x_new = x + dx
                if lower is not None:
                    x_new = np.clip(x_new, lower, upper)
                r_new = np.asarray(residual_fn(x_new), dtype=float)
                nfev += 1
                cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
                if cost_new < cost:
                    break
            mu *= 10.0
            if mu > _MAX_DAMPING:
                return LMResult(x, cost, it, False, nfev)
        step = x_new - x
        drop = cost - cost_new
        x, r, cost = x_new, r_new, cost_new
        mu = max(mu / 10.0, 1e-12)
        # residuals at rounding level: nothing left to fit
        if cost <= 1e-28 * cost0 or drop <= settings.ftol * cost:
            return LMResult(x, cost, it, True, nfev)
        if np.linalg.norm(step) <= settings.xtol * (np.linalg.norm(x) + settings.xtol):
            return LMResult(x, cost, it, True, nfev)
    return LMResult(x, cost, it, False, nfev)


def multistart_lsq(objective, spec: ModelSpec, plan: MultiStartPlan = MultiStartPlan(),
                   settings: OptimizerSettings = OptimizerSettings(),
                   threads: Optional[int] = None, guesses: Optional[np.ndarray] = None) -> FitResult:
    """Least-squares fit of counts with LM, one run per seeded guess.

    Same guess stream, unit-box parametrisation and tie-breaking as
    :func:`multistart_maximize`; ``objective_value`` is ``-sum(r**2)``.
    """
    t0 = time.perf_counter()
    box = UnitBox(spec)
    if guesses is None:
        guesses = draw_guesses(spec, plan)
    guesses = np.atleast_2d(np.asarray(guesses, dtype=float))
    zeros, ones = np.zeros(len(spec.layout)), np.ones(len(spec.layout))

    def residuals(u):
        return objective.residuals(box.to_theta(u))

    def task(i):
        return levenberg_marquardt(residuals, box.to_unit(guesses[i]), (zeros, ones), settings)

    results = _run_restarts(task, len(guesses), worker_count(threads))
    records = [RestartRecord(i, guesses[i].copy(), -float(r.cost), r.iterations, r.converged)
               for i, r in enumerate(results)]
    thetas = [box.to_theta(r.x) for r in results]
    best = _select(records, thetas, plan.keep_top)
    theta_hat = thetas[best]
    resid = objective.residuals(theta_hat)
    value = -float(resid @ resid)
    records[best].final_value = value
    return FitResult(
        theta_hat=theta_hat,
        objective_value=value,
        objective_kind="lsq",
        restart_records=records,
        fitted_curve=objective.curve(theta_hat),
        total_photons=objective.hist.total_photons,
        wall_time=time.perf_counter() - t0,
        converged=any(r.converged for r in records),
        names=spec.names,
        grid=objective.hist.grid,
    )
