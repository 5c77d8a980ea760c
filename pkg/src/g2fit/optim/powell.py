"""Powell's conjugate direction method with clamp-and-penalize box handling."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Optional

import numpy as np

from ..errors import BracketError, ValidationError
from .brent import brent_line_min, bracket_minimum
from .settings import OptimizerSettings

_TINY = 1e-25
PENALTY_WEIGHT = 1e6


class PowellResult(NamedTuple):
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    nfev: int


class _Boxed:
    """Objective with clamping and a quadratic penalty on bound violation."""

    def __init__(self, f, lower, upper, weight):
        self.f = f
        self.lower = lower
        self.upper = upper
        self.weight = weight
        self.nfev = 0

    def __call__(self, x):
        self.nfev += 1
        if self.lower is None:
            v = self.f(x)
            return v if math.isfinite(v) else math.inf
        xc = np.minimum(np.maximum(x, self.lower), self.upper)
        v = self.f(xc)
        if not math.isfinite(v):
            return math.inf
        viol = x - xc
        return v + self.weight * float(np.dot(viol, viol))

    def clamp(self, x):
        if self.lower is None:
            return x
        return np.minimum(np.maximum(x, self.lower), self.upper)


def powell_minimize(f: Callable[[np.ndarray], float], x0, bounds=None,
                    settings: Optional[OptimizerSettings] = None,
                    initial_step: float = 0.1, callback=None) -> PowellResult:
    """Minimise ``f`` from ``x0`` by Powell's direction-set method.

    ``bounds`` is ``None`` or a ``(lower, upper)`` pair of arrays. Trial points
    outside the box are evaluated at their clamped image plus a quadratic
    penalty ``1e6 * max(|f(x0)|, 1) * |violation|^2``; the returned point is
    always inside the box. Stops when one full sweep lowers ``f`` by less
    than ``ftol`` relative, or after ``max_iters`` sweeps.

    ``callback(x, fx)`` is called after every accepted sweep.
    """
    settings = settings or OptimizerSettings()
    x = np.array(x0, dtype=float)
    if x.ndim != 1:
        raise ValidationError("x0 must be a 1-d vector")
    lower = upper = None
    if bounds is not None:
        lower = np.asarray(bounds[0], dtype=float)
        upper = np.asarray(bounds[1], dtype=float)
        if lower.shape != x.shape or upper.shape != x.shape or np.any(lower > upper):
            raise ValidationError("bounds do not match x0")
        if np.any(x < lower) or np.any(x > upper):
            raise ValidationError("x0 lies outside the bounds")
    f0 = f(x)
    if not math.isfinite(f0):
        raise ValidationError(f"objective is not finite at x0 ({f0!r})")
    fun = _Boxed(f, lower, upper, PENALTY_WEIGHT * max(abs(f0), 1.0))
    fun.nfev = 1

    n = x.size
    directions = np.eye(n) * initial_step
    fx = f0
    x_prev = x.copy()
    converged = False
    it = 0
    for it in range(1, settings.max_iters + 1):
        f_start = fx
        biggest_drop = 0.0
        i_big = 0
        for i in range(n):
            f_before = fx
            x, fx = _line_min(fun, x, fx, directions[i], settings)
            if f_before - fx > biggest_drop:
                biggest_drop = f_before - fx
                i_big = i
        if callback is not None:
            callback(fun.clamp(x), fx)
        if 2.0 * (f_start - fx) <= settings.ftol * (abs(f_start) + abs(fx)) + _TINY:
            converged = True
            break
        extrap = 2.0 * x - x_prev
        new_dir = x - x_prev
        x_prev = x.copy()
        f_ext = fun(extrap)
        if f_ext < f_start:
            t = (2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - biggest_drop) ** 2
                 - biggest_drop * (f_start - f_ext) ** 2)
            if t < 0.0 and np.any(new_dir != 0.0):
                x, fx = _line_min(fun, x, fx, new_dir, settings)
                directions[i_big] = directions[-1]
                directions[-1] = new_dir
    xc = fun.clamp(x)
    if lower is not None and not np.array_equal(xc, x):
        fx = f(xc)
        fun.nfev += 1
    return PowellResult(xc, float(fx), it, converged, fun.nfev)


def _line_min(fun: _Boxed, x: np.ndarray, fx: float, d: np.ndarray, settings: OptimizerSettings):
    scale = float(np.sqrt(np.dot(d, d)))
    if scale == 0.0:
        return x, fx
    u = d / scale

    def along(t):
        return fun(x + t * u)

    try:
        (a, b, c), (fa, fb, fc), _ = bracket_minimum(along, 0.0, scale, fa=fx)
    except BracketError:
        return x, fx
    res = brent_line_min(along, (a, b, c), settings, fb=fb, abs_tol=settings.xtol, fa=fa, fc=fc)
    if res.fun < fx:
        return x + res.x * u, res.fun
    return x, fx
