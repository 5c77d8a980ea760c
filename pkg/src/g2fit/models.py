"""Correlation-function ansatzes evaluated on a delay grid.

Two models are provided:

* pulsed emitter: ``c0 + c1 exp(-g1|t|) (c2 exp(-g2|t|) + sum_{n!=0} exp(-g2|t - n L|))``
  with the side-pulse sum truncated symmetrically at ``|n| <= N``;
* thermal Gaussian sum: ``c0 + sum_n c_n exp(-t^2 / (2 s_n^2))``.

Delay values and rate/period parameters share whatever time unit the input
uses; nothing here converts units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import LayoutError, TruncationError, ValidationError

_SPACING_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DelayGrid:
    """Bin centres ``tau`` with a uniform ``bin_width``."""

    tau: np.ndarray
    bin_width: float

    def __post_init__(self):
        tau = np.ascontiguousarray(self.tau, dtype=float)
        if tau.ndim != 1 or tau.size == 0:
            raise ValidationError("delay grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(tau)):
            raise ValidationError("delay grid contains non-finite values")
        bw = float(self.bin_width)
        if not bw > 0 or not math.isfinite(bw):
            raise ValidationError(f"bin_width must be positive, got {self.bin_width!r}")
        if tau.size > 1:
            d = np.diff(tau)
            if np.any(d <= 0):
                raise ValidationError("delay grid must be strictly increasing")
            bad = np.flatnonzero(np.abs(d - bw) > _SPACING_RTOL * bw)
            if bad.size:
                raise ValidationError(
                    f"delay grid is not uniform at index {bad[0] + 1} "
                    f"(step {d[bad[0]]!r}, expected {bw!r})"
                )
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "bin_width", bw)

    @classmethod
    def from_tau(cls, tau: Sequence[float], bin_width: Optional[float] = None) -> "DelayGrid":
        tau = np.asarray(tau, dtype=float)
        if bin_width is None:
            if tau.size < 2:
                raise ValidationError("bin_width is required for a single-bin grid")
            bin_width = (tau[-1] - tau[0]) / (tau.size - 1)
        return cls(tau, bin_width)

    @classmethod
    def centered(cls, n_bins: int, bin_width: float = 1.0) -> "DelayGrid":
        """``n_bins`` bin centres placed symmetrically about zero."""
        if n_bins < 1:
            raise ValidationError("n_bins must be >= 1")
        tau = (np.arange(n_bins) - (n_bins - 1) / 2.0) * bin_width
        return cls(tau, bin_width)

    def __len__(self) -> int:
        return self.tau.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, DelayGrid):
            return NotImplemented
        return self.bin_width == other.bin_width and np.array_equal(self.tau, other.tau)

    __hash__ = None

    @property
    def tau_max(self) -> float:
        return float(np.max(np.abs(self.tau)))


# ---------------------------------------------------------------------------
# model variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulsedEmitterSpec:
    n_side_pulses: int
    fixed_background: Optional[float] = None  # None means c0 is fitted

    def __post_init__(self):
        if int(self.n_side_pulses) != self.n_side_pulses or self.n_side_pulses < 1:
            raise ValidationError(f"n_side_pulses must be a positive integer, got {self.n_side_pulses!r}")
        _check_background(self.fixed_background)


@dataclass(frozen=True)
class ThermalSumSpec:
    num_gaussians: int = 1
    fixed_background: Optional[float] = None

    def __post_init__(self):
        if int(self.num_gaussians) != self.num_gaussians or self.num_gaussians < 1:
            raise ValidationError(f"num_gaussians must be a positive integer, got {self.num_gaussians!r}")
        _check_background(self.fixed_background)


def _check_background(value):
    if value is not None and not (math.isfinite(value) and value >= 0):
        raise ValidationError(f"fixed background must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class PulsedEmitterParams:
    c0: float
    c1: float
    c2: float
    gamma1: float
    gamma2: float
    Lambda: float

    def validate(self) -> None:
        for name in ("c0", "c1", "c2", "gamma1"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"parameter {name} must be finite and >= 0, got {v!r}")
        for name in ("gamma2", "Lambda"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"parameter {name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class ThermalSumParams:
    c0: float
    c: tuple
    sigma: tuple

    def validate(self, num_gaussians: Optional[int] = None) -> None:
        if not (math.isfinite(self.c0) and self.c0 >= 0):
            raise ValidationError(f"parameter c0 must be finite and >= 0, got {self.c0!r}")
        if len(self.c) != len(self.sigma):
            raise ValidationError("amplitude and width sequences differ in length")
        if num_gaussians is not None and len(self.c) != num_gaussians:
            raise ValidationError(f"expected {num_gaussians} Gaussian terms, got {len(self.c)}")
        for j, v in enumerate(self.c, start=1):
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"parameter c{j} must be finite and >= 0, got {v!r}")
        for j, v in enumerate(self.sigma, start=1):
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"parameter sigma{j} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class ParamSpec:
    """One entry of a model's flat parameter layout."""

    name: str
    lower: float
    upper: float
    regularized: bool = False
    log_scale: bool = False  # draw multi-start guesses log-uniformly


Variant = Union[PulsedEmitterSpec, ThermalSumSpec]


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    layout: tuple = field(default_factory=tuple)

    def __post_init__(self):
        layout = tuple(self.layout)
        object.__setattr__(self, "layout", layout)
        names = [p.name for p in layout]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate parameter names in layout: {names}")
        expected = _full_names(self.variant)
        if self.variant.fixed_background is not None:
            expected = [n for n in expected if n != "c0"]
        if sorted(names) != sorted(expected):
            raise LayoutError(f"layout names {names} do not match model parameters {expected}")
        for p in layout:
            if not (math.isfinite(p.lower) and math.isfinite(p.upper) and p.lower < p.upper):
                raise ValidationError(f"bounds for {p.name} must be finite with lower < upper")
            if p.log_scale and p.lower <= 0:
                raise ValidationError(f"log-scaled parameter {p.name} needs a positive lower bound")
        # position of each full-model parameter in theta (-1 = frozen c0)
        index = {n: i for i, n in enumerate(names)}
        slots = np.array([index.get(n, -1) for n in _full_names(self.variant)])
        object.__setattr__(self, "_slots", slots)
        object.__setattr__(self, "_take", np.maximum(slots, 0))
        object.__setattr__(self, "_frozen", bool(np.any(slots < 0)))

    @property
    def kind(self) -> str:
        return "pulsed" if isinstance(self.variant, PulsedEmitterSpec) else "thermal"

    @property
    def names(self) -> list:
        return [p.name for p in self.layout]

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for p in self.layout])

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for p in self.layout])

    @property
    def regularized_mask(self) -> np.ndarray:
        return np.array([p.regularized for p in self.layout], dtype=bool)

    @property
    def log_mask(self) -> np.ndarray:
        return np.array([p.log_scale for p in self.layout], dtype=bool)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def pack(self, params) -> np.ndarray:
        """Flatten a params object (or name->value mapping) in layout order."""
        values = _as_mapping(params)
        try:
            return np.array([float(values[n]) for n in self.names])
        except KeyError as exc:
            raise LayoutError(f"missing parameter {exc.args[0]}") from None

    def unpack(self, theta):
        """Build the typed params object for a flat vector."""
        theta = self._check(theta)
        full = self._full(theta)
        if self.kind == "pulsed":
            return PulsedEmitterParams(*map(float, full))
        k = self.variant.num_gaussians
        return ThermalSumParams(float(full[0]), tuple(map(float, full[1:1 + k])), tuple(map(float, full[1 + k:])))

    def as_dict(self, theta) -> dict:
        theta = self._check(theta)
        return {n: float(v) for n, v in zip(self.names, theta)}

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size != len(self.layout):
            raise LayoutError(f"theta has length {theta.size}, layout expects {len(self.layout)}")
        return theta

    def _full(self, theta: np.ndarray) -> np.ndarray:
        full = theta[self._take]
        if self._frozen:
            full[0] = self.variant.fixed_background
        return full

    def curve(self, theta: np.ndarray, tau: np.ndarray) -> np.ndarray:
        """Unchecked evaluation used in optimizer inner loops."""
        full = self._full(theta)
        v = self.variant
        if isinstance(v, PulsedEmitterSpec):
            c0, c1, c2, g1, g2, lam = full.tolist()
            return _kernels.pulsed_kernel(tau, c0, c1, c2, g1, g2, lam, v.n_side_pulses)
        k = v.num_gaussians
        return _kernels.thermal_kernel(tau, full[0], full[1:1 + k].copy(), full[1 + k:].copy())


def _full_names(variant) -> list:
    if isinstance(variant, PulsedEmitterSpec):
        return ["c0", "c1", "c2", "gamma1", "gamma2", "Lambda"]
    k = variant.num_gaussians
    return ["c0"] + [f"c{j}" for j in range(1, k + 1)] + [f"sigma{j}" for j in range(1, k + 1)]


def _as_mapping(params) -> dict:
    if isinstance(params, dict):
        return params
    if isinstance(params, ThermalSumParams):
        out = {"c0": params.c0}
        out.update({f"c{j}": v for j, v in enumerate(params.c, start=1)})
        out.update({f"sigma{j}": v for j, v in enumerate(params.sigma, start=1)})
        return out
    return dict(vars(params))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def eval_pulsed(params: PulsedEmitterParams, spec: PulsedEmitterSpec, grid: DelayGrid) -> np.ndarray:
    params.validate()
    n = spec.n_side_pulses
    if grid.tau_max > (n - 0.5) * params.Lambda:
        raise TruncationError(
            f"{n} side pulses with period {params.Lambda} cover |tau| <= {(n - 0.5) * params.Lambda}, "
            f"grid extends to {grid.tau_max}"
        )
    p = params
    return _kernels.pulsed_kernel(grid.tau, float(p.c0), float(p.c1), float(p.c2), float(p.gamma1),
                                  float(p.gamma2), float(p.Lambda), n)


def eval_thermal(params: ThermalSumParams, spec: ThermalSumSpec, grid: DelayGrid) -> np.ndarray:
    params.validate(spec.num_gaussians)
    return _kernels.thermal_kernel(grid.tau, float(params.c0), np.asarray(params.c, dtype=float),
                                   np.asarray(params.sigma, dtype=float))


def evaluate(spec: ModelSpec, theta, grid: DelayGrid) -> np.ndarray:
    """Evaluate either ansatz from a flat parameter vector in layout order."""
    params = spec.unpack(theta)
    if spec.kind == "pulsed":
        return eval_pulsed(params, spec.variant, grid)
    return eval_thermal(params, spec.variant, grid)


def default_truncation(grid: DelayGrid, Lambda_lower_bound: float) -> int:
    """Smallest N with ``(N - 1) * Lambda_lb >= max|tau| + Lambda_lb``."""
    if not (math.isfinite(Lambda_lower_bound) and Lambda_lower_bound > 0):
        raise ValidationError(f"Lambda lower bound must be positive, got {Lambda_lower_bound!r}")
    need = grid.tau_max / Lambda_lower_bound + 1.0
    n = max(1, math.ceil(need) + 1)
    # ceil can land one short/long under rounding; settle on the exact inequality
    while n > 1 and (n - 2) * Lambda_lower_bound >= grid.tau_max + Lambda_lower_bound:
        n -= 1
    while (n - 1) * Lambda_lower_bound < grid.tau_max + Lambda_lower_bound:
        n += 1
    return n


def truncation_tail_bound(params: PulsedEmitterParams, n_side: int, tau_max: float) -> float:
    """Upper bound on the dropped side-pulse terms ``|n| > n_side`` for ``|tau| <= tau_max``.

    Each dropped side is a geometric tail starting at distance ``(n_side+1) L - tau_max``.
    """
    g, lam = params.gamma2, params.Lambda
    start = (n_side + 1) * lam - tau_max
    if start <= 0:
        return math.inf
    return 2.0 * params.c1 * math.exp(-g * start) / (-math.expm1(-g * lam))


# ---------------------------------------------------------------------------
# layouts with scale-aware default bounds
# ---------------------------------------------------------------------------


def _scales(grid: DelayGrid, max_count):
    amp_hi = 10.0 * max(float(max_count), 1.0)
    tmax = grid.tau_max if grid.tau_max > 0 else grid.bin_width
    return amp_hi, tmax


def pulsed_model(grid: DelayGrid, max_count: float, n_side_pulses: Optional[int] = None,
                 fixed_background: Optional[float] = None) -> ModelSpec:
    """Pulsed-emitter spec with default bounds derived from the grid and peak count."""
    amp_hi, tmax = _scales(grid, max_count)
    bw = grid.bin_width
    lam_lo = 2.0 * bw
    if not tmax > lam_lo:
        raise ValidationError("delay window must exceed two bin widths to fit a repetition period")
    if n_side_pulses is None:
        n_side_pulses = default_truncation(grid, lam_lo)
    variant = PulsedEmitterSpec(n_side_pulses, fixed_background)
    rate_lo, rate_hi = 1e-4 / tmax, 10.0 / bw
    layout = [
        ParamSpec("c0", 0.0, amp_hi),
        ParamSpec("c1", 0.0, amp_hi, regularized=True),
        ParamSpec("c2", 0.0, 10.0, regularized=True),
        ParamSpec("gamma1", rate_lo, rate_hi, log_scale=True),
        ParamSpec("gamma2", rate_lo, rate_hi, log_scale=True),
        ParamSpec("Lambda", lam_lo, tmax),
    ]
    if fixed_background is not None:
        layout = layout[1:]
    return ModelSpec(variant, tuple(layout))


def thermal_model(grid: DelayGrid, max_count: float, num_gaussians: int = 1,
                  fixed_background: Optional[float] = None) -> ModelSpec:
    """Thermal Gaussian-sum spec with default bounds derived from the grid and peak count."""
    amp_hi, tmax = _scales(grid, max_count)
    variant = ThermalSumSpec(num_gaussians, fixed_background)
    layout = [] if fixed_background is not None else [ParamSpec("c0", 0.0, amp_hi)]
    layout += [ParamSpec(f"c{j}", 0.0, amp_hi, regularized=True) for j in range(1, num_gaussians + 1)]
    layout += [ParamSpec(f"sigma{j}", grid.bin_width / 10.0, 10.0 * tmax, log_scale=True)
               for j in range(1, num_gaussians + 1)]
    return ModelSpec(variant, tuple(layout))


def with_bounds(spec: ModelSpec, **bounds) -> ModelSpec:
    """Copy of ``spec`` with selected ``name=(lower, upper)`` bounds replaced."""
    layout = []
    for p in spec.layout:
        if p.name in bounds:
            lo, hi = bounds.pop(p.name)
            p = ParamSpec(p.name, float(lo), float(hi), p.regularized, p.log_scale)
        layout.append(p)
    if bounds:
        raise LayoutError(f"unknown parameters: {sorted(bounds)}")
    return ModelSpec(spec.variant, tuple(layout))
