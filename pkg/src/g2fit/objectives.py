"""Poisson likelihood, Laplace prior and the objectives built from them.

All objectives are maximised. The ``-log(n_i!)`` constant is dropped, so
likelihood values are only comparable within one histogram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ValidationError
from .models import DelayGrid, ModelSpec, evaluate


@dataclass(frozen=True, eq=False)
class Histogram:
    """Measured shot record: bin centres plus integer counts."""

    grid: DelayGrid
    counts: np.ndarray
    provenance: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size != len(self.grid):
            raise ValidationError(f"counts length {counts.size} does not match grid length {len(self.grid)}")
        if counts.dtype.kind == "f":
            if not np.all(np.isfinite(counts)) or np.any(counts != np.round(counts)):
                raise ValidationError("counts must be integers")
        elif counts.dtype.kind not in "iub":
            raise ValidationError(f"counts must be integers, got dtype {counts.dtype}")
        if np.any(counts < 0):
            raise ValidationError("counts must be non-negative")
        counts = np.ascontiguousarray(counts, dtype=np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def tau(self) -> np.ndarray:
        return self.grid.tau

    @property
    def total_photons(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.counts, other.counts)

    __hash__ = None


class ObjectiveKind(str, Enum):
    MAP = "map"
    MLE = "mle"
    LSQ = "lsq"


@dataclass(frozen=True)
class ObjectiveConfig:
    """Objective kind plus L1 weights for the regularised parameters.

    ``lam`` may be a scalar (broadcast over every regularised parameter) or a
    sequence aligned with them. ``MLE`` requires all weights to be zero.
    """

    kind: ObjectiveKind = ObjectiveKind.MLE
    lam: Union[float, tuple] = 0.0

    def __post_init__(self):
        kind = ObjectiveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        lam = self.lam
        if np.ndim(lam) == 0:
            lam = float(lam)
            values = [lam]
        else:
            lam = tuple(float(v) for v in lam)
            values = list(lam)
        object.__setattr__(self, "lam", lam)
        if any(not (math.isfinite(v) and v >= 0) for v in values):
            raise ConfigurationError(f"lambda weights must be finite and >= 0, got {self.lam!r}")
        if kind is ObjectiveKind.MLE and any(v != 0 for v in values):
            raise ConfigurationError("MLE objective requires lambda = 0")

    @classmethod
    def map(cls, lam=0.0) -> "ObjectiveConfig":
        return cls(ObjectiveKind.MAP, lam)

    @property
    def is_unregularized(self) -> bool:
        return np.all(np.asarray(self.lam) == 0)

    def weights(self, spec: ModelSpec) -> np.ndarray:
        """Per-layout-entry weights, zero outside the regularised subset."""
        mask = spec.regularized_mask
        out = np.zeros(mask.size)
        if np.ndim(self.lam) == 0:
            out[mask] = self.lam
        else:
            if len(self.lam) != mask.sum():
                raise ConfigurationError(
                    f"{len(self.lam)} lambda weights given for {int(mask.sum())} regularised parameters"
                )
            out[mask] = self.lam
        return out


def _as_arrays(y, counts):
    y = np.ascontiguousarray(y, dtype=float)
    n = np.ascontiguousarray(counts, dtype=np.int64)
    if y.shape != n.shape or y.ndim != 1:
        raise ValidationError(f"shape mismatch: y {y.shape} vs counts {n.shape}")
    if np.any(np.isnan(y)):
        raise ValidationError("NaN in model curve")
    return y, n


def poisson_loglik(y, counts) -> float:
    """``sum_i n_i log y_i - y_i``; ``-inf`` if some ``y_i <= 0`` carries counts."""
    y, n = _as_arrays(y, counts)
    return float(_kernels.loglik_kernel(y, n))


def loglik_grad_y(y, counts) -> np.ndarray:
    """Elementwise ``n_i / y_i - 1``; ``-inf`` where ``y_i <= 0`` carries counts."""
    y, n = _as_arrays(y, counts)
    out = np.full(y.shape, -1.0)
    pos = n > 0
    bad = pos & ~(y > 0)
    ok = pos & ~bad
    out[ok] = n[ok] / y[ok] - 1.0
    out[bad] = -np.inf
    return out


def laplace_logprior(theta, spec: ModelSpec, config: ObjectiveConfig) -> float:
    """``-sum_j lam_j |theta_j|`` over the regularised parameters."""
    w = config.weights(spec)
    theta = spec._check(theta)
    if not np.any(w):
        return 0.0
    return -float(np.dot(w, np.abs(theta)))


def map_objective(theta, spec: ModelSpec, hist: Histogram, config: ObjectiveConfig) -> float:
    ll = poisson_loglik(evaluate(spec, theta, hist.grid), hist.counts)
    if config.kind is ObjectiveKind.MLE:
        return ll
    return ll + laplace_logprior(theta, spec, config)


def lsq_objective(theta, spec: ModelSpec, hist: Histogram) -> float:
    """Negated residual sum of squares."""
    r = hist.counts - evaluate(spec, theta, hist.grid)
    return -float(np.dot(r, r))


class Objective:
    """Callable ``theta -> objective value`` bound to one spec and histogram.

    This is the optimizer-facing form of :func:`map_objective` and
    :func:`lsq_objective`: parameter validation is skipped (the optimizer
    keeps theta inside the box) but the arithmetic is the same.
    """

    def __init__(self, spec: ModelSpec, hist: Histogram, config: ObjectiveConfig = ObjectiveConfig()):
        self.spec = spec
        self.hist = hist
        self.config = config
        self.kind = config.kind
        self._tau = hist.grid.tau
        self._n = hist.counts
        self._nf = hist.counts.astype(float)
        self._w = config.weights(spec)
        self._penalized = self.kind is ObjectiveKind.MAP and bool(np.any(self._w))

    def curve(self, theta) -> np.ndarray:
        return self.spec.curve(np.asarray(theta, dtype=float), self._tau)

    def __call__(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        y = self.spec.curve(theta, self._tau)
        if self.kind is ObjectiveKind.LSQ:
            r = self._nf - y
            return -float(np.dot(r, r))
        val = float(_kernels.loglik_kernel(y, self._n))
        if self._penalized:
            val -= float(np.dot(self._w, np.abs(theta)))
        return val

    def residuals(self, theta) -> np.ndarray:
        return self._nf - self.curve(theta)


def make_objective(spec: ModelSpec, hist: Histogram, kind: Union[str, ObjectiveKind] = "mle",
                   lam: Union[float, Sequence[float]] = 0.0) -> Objective:
    return Objective(spec, hist, ObjectiveConfig(kind, lam))
