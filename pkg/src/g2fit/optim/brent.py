"""Scalar minimisation: downhill bracketing and Brent's method."""

from __future__ import annotations

import math
from typing import Callable, NamedTuple, Tuple

from ..errors import BracketError
from .settings import OptimizerSettings

_GOLD = 1.618033988749895
_CGOLD = 0.3819660112501051
_TINY = 1e-21


class LineMin(NamedTuple):
    x: float
    fun: float
    nfev: int
    converged: bool


def _finite(v: float) -> float:
    # keep interpolation arithmetic free of inf/nan; rejected points stay rejected
    return v if math.isfinite(v) else 1e300


def bracket_minimum(f: Callable[[float], float], a: float = 0.0, b: float = 1.0,
                    fa: float = None, grow_limit: float = 100.0,
                    max_evals: int = 60) -> Tuple[Tuple[float, float, float], Tuple[float, float, float], int]:
    """Walk downhill from ``(a, b)`` until ``f(b) < f(a), f(b) < f(c)``.

    Returns ``((a, b, c), (fa, fb, fc), nfev)``. Raises ``BracketError`` if no
    bracket is found within ``max_evals`` evaluations.
    """
    nfev = 0
    if fa is None:
        fa = _finite(f(a))
        nfev += 1
    fb = _finite(f(b))
    nfev += 1
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    c = b + _GOLD * (b - a)
    fc = _finite(f(c))
    nfev += 1
    while fb >= fc:
        if nfev >= max_evals:
            raise BracketError(f"no bracket found after {nfev} evaluations")
        r = (b - a) * (fb - fc)
        q = (b - c) * (fb - fa)
        denom = 2.0 * math.copysign(max(abs(q - r), _TINY), q - r)
        u = b - ((b - c) * q - (b - a) * r) / denom
        ulim = b + grow_limit * (c - b)
        if (b - u) * (u - c) > 0.0:
            fu = _finite(f(u))
            nfev += 1
            if fu < fc:
                return (*_ordered(b, u, c, fb, fu, fc), nfev)
            if fu > fb:
                return (*_ordered(a, b, u, fa, fb, fu), nfev)
            u = c + _GOLD * (c - b)
            fu = _finite(f(u))
            nfev += 1
        elif (c - u) * (u - ulim) > 0.0:
            fu = _finite(f(u))
            nfev += 1
            if fu < fc:
                b, c, u = c, u, u + _GOLD * (u - c)
                fb, fc, fu = fc, fu, _finite(f(u))
                nfev += 1
        elif (u - ulim) * (ulim - c) >= 0.0:
            u = ulim
            fu = _finite(f(u))
            nfev += 1
        else:
            u = c + _GOLD * (c - b)
            fu = _finite(f(u))
            nfev += 1
        a, b, c = b, c, u
        fa, fb, fc = fb, fc, fu
    return (*_ordered(a, b, c, fa, fb, fc), nfev)


def _ordered(a, b, c, fa, fb, fc):
    if a > c:
        a, c, fa, fc = c, a, fc, fa
    return (a, b, c), (fa, fb, fc)


def brent_line_min(f: Callable[[float], float], bracket: Tuple[float, float, float],
                   settings: OptimizerSettings = None, fb: float = None,
                   abs_tol: float = 1e-10, fa: float = None, fc: float = None) -> LineMin:
    """Minimise ``f`` inside ``bracket = (a, b, c)`` with ``f(b)`` below both ends.

    Known values ``fa``, ``fb``, ``fc`` may be passed to save evaluations.
    Stops when the minimum is located to ``settings.xtol * |x| + abs_tol``.
    If ``settings.max_line_evals`` runs out the best point so far is returned
    with ``converged=False``.
    """
    settings = settings or OptimizerSettings()
    a, b, c = (float(v) for v in bracket)
    if not (min(a, c) < b < max(a, c)):
        raise BracketError(f"middle point {b} is not strictly inside ({a}, {c})")
    nfev = 0
    if fb is None:
        fb = _finite(f(b))
        nfev += 1
    if fa is None:
        fa = _finite(f(a))
        nfev += 1
    if fc is None:
        fc = _finite(f(c))
        nfev += 1
    if fb > fa or fb > fc:
        raise BracketError(f"f(b)={fb!r} is not below the end values {fa!r}, {fc!r}")
    lo, hi = min(a, c), max(a, c)
    rtol = settings.xtol / 2.0
    atol = abs_tol / 2.0

    x = w = v = b
    fx = fw = fv = fb
    d = e = 0.0
    while True:
        xm = 0.5 * (lo + hi)
        tol1 = rtol * abs(x) + atol
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
            return LineMin(x, fx, nfev, True)
        if nfev >= settings.max_line_evals:
            return LineMin(x, fx, nfev, False)
        use_golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if (math.isfinite(p) and q > 0.0 and abs(p) < abs(0.5 * q * etemp)
                    and q * (lo - x) < p < q * (hi - x)):
                d = p / q
                u = x + d
                if u - lo < tol2 or hi - u < tol2:
                    d = tol1 if xm >= x else -tol1
                use_golden = False
        if use_golden:
            e = (lo - x) if x >= xm else (hi - x)
            d = _CGOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = _finite(f(u))
        nfev += 1
        if fu <= fx:
            if u >= x:
                lo = x
            else:
                hi = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                lo = u
            else:
                hi = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
