"""Hot numeric kernels, compiled and vectorised variants.

The ``*_loop`` functions are numba targets; the ``*_np`` functions are the
pure-numpy path. Public names at the bottom are bound according to
``_accel.USE_NUMBA``. Both variants agree to rounding; within one backend
every result is deterministic.
"""

import math

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# pulsed emitter model
# ---------------------------------------------------------------------------


@njit
def _side_segment_loop(t, a, b, g2, lam):
    # sum_{n=a..b} exp(-g2 |t - n lam|), split at the pulse left of t and
    # summed as two geometric series
    m = math.floor(t / lam)
    denom = math.expm1(-g2 * lam)
    total = 0.0
    hi = min(b, m)
    k = hi - a + 1
    if k > 0:
        total += math.exp(-g2 * (t - hi * lam)) * (math.expm1(-g2 * lam * k) / denom)
    lo = max(a, m + 1)
    k = b - lo + 1
    if k > 0:
        total += math.exp(-g2 * (lo * lam - t)) * (math.expm1(-g2 * lam * k) / denom)
    return total


@njit
def pulsed_loop(tau, c0, c1, c2, g1, g2, lam, n_side):
    out = np.empty(tau.shape[0])
    for i in range(tau.shape[0]):
        t = tau[i]
        at = abs(t)
        side = _side_segment_loop(t, -n_side, -1, g2, lam) + _side_segment_loop(t, 1, n_side, g2, lam)
        out[i] = c0 + c1 * math.exp(-g1 * at) * (c2 * math.exp(-g2 * at) + side)
    return out


def _side_segment_np(tau, a, b, g2, lam):
    m = np.floor(tau / lam)
    denom = math.expm1(-g2 * lam)
    hi = np.minimum(b, m)
    k = np.maximum(hi - a + 1, 0)
    arg = np.where(k > 0, -g2 * (tau - hi * lam), 0.0)
    total = np.exp(arg) * (np.expm1(-g2 * lam * k) / denom)
    lo = np.maximum(a, m + 1)
    k = np.maximum(b - lo + 1, 0)
    arg = np.where(k > 0, -g2 * (lo * lam - tau), 0.0)
    return total + np.exp(arg) * (np.expm1(-g2 * lam * k) / denom)


def pulsed_np(tau, c0, c1, c2, g1, g2, lam, n_side):
    at = np.abs(tau)
    side = _side_segment_np(tau, -n_side, -1, g2, lam) + _side_segment_np(tau, 1, n_side, g2, lam)
    return c0 + c1 * np.exp(-g1 * at) * (c2 * np.exp(-g2 * at) + side)


# ---------------------------------------------------------------------------
# thermal Gaussian sum
# ---------------------------------------------------------------------------


@njit
def thermal_loop(tau, c0, amps, sigmas):
    out = np.empty(tau.shape[0])
    for i in range(tau.shape[0]):
        t2 = tau[i] * tau[i]
        acc = c0
        for j in range(amps.shape[0]):
            acc += amps[j] * math.exp(-t2 / (2.0 * sigmas[j] * sigmas[j]))
        out[i] = acc
    return out


def thermal_np(tau, c0, amps, sigmas):
    t2 = tau[:, None] ** 2
    return c0 + np.exp(-t2 / (2.0 * sigmas[None, :] ** 2)) @ amps


# ---------------------------------------------------------------------------
# Poisson log-likelihood (log n! dropped)
# ---------------------------------------------------------------------------


@njit
def loglik_loop(y, n):
    acc = 0.0
    for i in range(y.shape[0]):
        yi = y[i]
        if n[i] > 0:
            if not yi > 0.0:
                return -np.inf
            acc += n[i] * math.log(yi)
        acc -= yi
    return acc


def loglik_np(y, n):
    pos = n > 0
    yp = y[pos]
    if not np.all(yp > 0.0):
        return -np.inf
    return float(np.dot(n[pos], np.log(yp)) - y.sum())


# ---------------------------------------------------------------------------
# Poisson sampling: inversion below the cutoff, PTRS above it
# ---------------------------------------------------------------------------

PTRS_CUTOFF = 30.0


@njit
def inversion_loop(rate, u, out):
    # one uniform per bin; bins with rate >= cutoff are left untouched
    for i in range(rate.shape[0]):
        lam = rate[i]
        if lam <= 0.0 or lam >= 30.0:
            continue
        p = math.exp(-lam)
        cdf = p
        k = 0
        while u[i] > cdf:
            k += 1
            p *= lam / k
            new = cdf + p
            if new == cdf:
                break
            cdf = new
        out[i] = k


def inversion_np(rate, u, out):
    sel = (rate > 0.0) & (rate < PTRS_CUTOFF)
    if not np.any(sel):
        return
    lam = rate[sel]
    uu = u[sel]
    p = np.exp(-lam)
    cdf = p.copy()
    k = np.zeros(lam.shape[0], dtype=np.int64)
    active = uu > cdf
    step = 0
    while np.any(active):
        step += 1
        p = p * lam / step
        new = cdf + p
        stalled = new == cdf
        cdf = np.where(active, new, cdf)
        k = np.where(active, step, k)
        active = active & (uu > cdf) & ~stalled
    out[sel] = k


@njit
def ptrs_step_loop(lam, u, v, out, accepted):
    # one transformed-rejection attempt per pending entry
    for i in range(lam.shape[0]):
        if accepted[i]:
            continue
        L = lam[i]
        slam = math.sqrt(L)
        loglam = math.log(L)
        b = 0.931 + 2.53 * slam
        a = -0.059 + 0.02483 * b
        invalpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        U = u[i] - 0.5
        V = v[i]
        us = 0.5 - abs(U)
        k = math.floor((2.0 * a / us + b) * U + L + 0.43)
        if us >= 0.07 and V <= vr:
            out[i] = int(k)
            accepted[i] = True
            continue
        if k < 0.0 or (us < 0.013 and V > us):
            continue
        lhs = math.log(V) + math.log(invalpha) - math.log(a / (us * us) + b)
        rhs = -L + k * loglam - math.lgamma(k + 1.0)
        if lhs <= rhs:
            out[i] = int(k)
            accepted[i] = True


def ptrs_step_np(lam, u, v, out, accepted):
    from scipy.special import gammaln

    pend = ~accepted
    if not np.any(pend):
        return
    L = lam[pend]
    slam = np.sqrt(L)
    loglam = np.log(L)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    U = u[pend] - 0.5
    V = v[pend]
    us = 0.5 - np.abs(U)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.floor((2.0 * a / us + b) * U + L + 0.43)
        quick = (us >= 0.07) & (V <= vr)
        reject = (k < 0.0) | ((us < 0.013) & (V > us))
        lhs = np.log(V) + np.log(invalpha) - np.log(a / (us * us) + b)
        rhs = -L + k * loglam - gammaln(np.where(k < 0.0, 0.0, k) + 1.0)
        ok = quick | (~reject & (lhs <= rhs))
    idx = np.flatnonzero(pend)
    out[idx[ok]] = k[ok]
    accepted[idx[ok]] = True


if USE_NUMBA:
    pulsed_kernel = pulsed_loop
    thermal_kernel = thermal_loop
    loglik_kernel = loglik_loop
    inversion_kernel = inversion_loop
    ptrs_step_kernel = ptrs_step_loop
else:
    pulsed_kernel = pulsed_np
    thermal_kernel = thermal_np
    loglik_kernel = loglik_np
    inversion_kernel = inversion_np
    ptrs_step_kernel = ptrs_step_np
