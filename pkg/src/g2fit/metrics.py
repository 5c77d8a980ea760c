"""Reconstruction quality metrics and the paired estimator benchmark.

Benchmarks measure errors against the known synthetic ground truth
``T * y(theta*)``, not against a long real acquisition.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import NormalizationError, ValidationError
from .models import DelayGrid, ModelSpec, evaluate, pulsed_model, thermal_model
from .objectives import Histogram, Objective, ObjectiveConfig
from .optim import MultiStartPlan, OptimizerSettings, UnitBox, multistart_lsq, multistart_maximize
from .optim.multistart import FitResult
from .sampler import sample_poisson, scale_signal, substream

REFERENCE_NOTE = "errors are measured against the synthetic ground truth T*y(theta_true)"


def nrmse(estimate, reference) -> float:
    """RMS error divided by the reference's max - min."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    if est.shape != ref.shape or est.ndim != 1:
        raise ValidationError(f"shape mismatch: {est.shape} vs {ref.shape}")
    span = float(ref.max() - ref.min())
    if not span > 0:
        raise NormalizationError("reference curve is constant; NRMSE normalisation undefined")
    d = est - ref
    return float(np.sqrt(np.mean(d * d)) / span)


@dataclass
class MetricsReport:
    nrmse: float
    total_photons: Optional[int]
    photons_per_bin: Optional[float]
    residual_max_abs: float
    residual_mean: float
    residual_variance: float

    def as_dict(self) -> dict:
        return dict(vars(self))


def metrics_report(estimate, reference, counts=None) -> MetricsReport:
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(reference, dtype=float)
    r = est - ref
    total = per_bin = None
    if counts is not None:
        total = int(np.sum(counts))
        per_bin = total / len(counts)
    return MetricsReport(nrmse(est, ref), total, per_bin, float(np.max(np.abs(r))),
                         float(np.mean(r)), float(np.var(r)))


def center_peak_ratio(spec: ModelSpec, theta) -> float:
    """Background-free height of the zero-delay peak relative to the first side peak."""
    if spec.kind != "pulsed":
        raise ValidationError("center-peak ratio is defined for the pulsed model only")
    p = spec.unpack(theta)
    y = spec.curve(np.asarray(theta, dtype=float), np.array([0.0, p.Lambda])) - p.c0
    if not y[1] > 0:
        return float("inf")
    return float(y[0] / y[1])


# ---------------------------------------------------------------------------
# shot-noise (Cramer-Rao) check
# ---------------------------------------------------------------------------


@dataclass
class CRBReport:
    mean: np.ndarray
    variance: np.ndarray
    ratio: np.ndarray  # variance / mean per bin; nan where the mean is 0
    n_replicates: int
    degenerate: bool

    @property
    def ratio_mean(self) -> float:
        return float(np.nanmean(self.ratio)) if not self.degenerate else float("nan")

    @property
    def ratio_stderr(self) -> float:
        ok = self.ratio[np.isfinite(self.ratio)]
        if ok.size < 2:
            return float("nan")
        return float(np.std(ok, ddof=1) / np.sqrt(ok.size))


def crb_empirical_check(spec: ModelSpec, theta_true, grid: DelayGrid, T: float, n_replicates: int,
                        seed: int) -> CRBReport:
    """Per-bin empirical mean and variance of raw counts over replicate draws.

    For Poisson counts the raw-count estimator is unbiased and attains the
    Cramer-Rao bound, so ``variance / mean`` should concentrate at 1.
    """
    if n_replicates < 1000:
        raise ValidationError("at least 1000 replicates are required")
    rate = scale_signal(evaluate(spec, theta_true, grid), T)
    draws = np.empty((n_replicates, rate.size), dtype=np.int64)
    for k in range(n_replicates):
        draws[k] = sample_poisson(rate, substream(seed, k))
    mean = draws.mean(axis=0)
    var = draws.var(axis=0, ddof=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(mean > 0, var / mean, np.nan)
    return CRBReport(mean, var, ratio, n_replicates, degenerate=not np.any(mean > 0))


# ---------------------------------------------------------------------------
# integration-time ladder
# ---------------------------------------------------------------------------


@dataclass
class LadderRung:
    time_scale: float
    histogram: Histogram
    nrmse: float  # simulated counts vs the scaled fitted curve


def integration_time_ladder(fit: FitResult, T_ladder: Sequence[float], seed: int,
                            grid: Optional[DelayGrid] = None) -> List[LadderRung]:
    """Scale a fitted curve by each T and draw one Poisson histogram per rung."""
    grid = grid if grid is not None else fit.grid
    if grid is None:
        raise ValidationError("fit carries no delay grid; pass one explicitly")
    out = []
    for i, T in enumerate(T_ladder):
        rate = scale_signal(fit.fitted_curve, T)
        counts = sample_poisson(rate, substream(seed, i))
        try:
            err = nrmse(counts, rate)
        except NormalizationError:
            err = float("nan")
        out.append(LadderRung(float(T), Histogram(grid, counts), err))
    return out


# ---------------------------------------------------------------------------
# paired ensemble benchmark
# ---------------------------------------------------------------------------


def parse_methods(methods: Union[str, Sequence[str]], lambda_grid: Sequence[float] = (0.0,)) -> List[str]:
    """Expand ``"map,mle,lsq"`` into labels; ``map`` becomes one label per lambda."""
    if isinstance(methods, str):
        methods = [m for m in methods.split(",") if m.strip()]
    labels = []
    for m in methods:
        m = m.strip().lower()
        if m == "map":
            labels += [f"map:{float(lam):g}" for lam in lambda_grid]
        elif m.startswith("map:"):
            float(m[4:])
            labels.append(m)
        elif m in ("mle", "lsq"):
            labels.append(m)
        else:
            raise ValidationError(f"unknown method {m!r}; expected map, mle or lsq")
    return list(dict.fromkeys(labels))


def refit_spec(spec: ModelSpec, hist: Histogram) -> ModelSpec:
    """Same model structure as ``spec`` with default bounds scaled to ``hist``."""
    v = spec.variant
    if spec.kind == "pulsed":
        return pulsed_model(hist.grid, hist.counts.max(), v.n_side_pulses, v.fixed_background)
    return thermal_model(hist.grid, hist.counts.max(), v.num_gaussians, v.fixed_background)


def fit_histogram(method: str, spec: ModelSpec, hist: Histogram, plan: MultiStartPlan,
                  settings: OptimizerSettings = OptimizerSettings(), threads=None, guesses=None) -> FitResult:
    if method == "lsq":
        return multistart_lsq(Objective(spec, hist, ObjectiveConfig("lsq")), spec, plan, settings, threads, guesses)
    if method == "mle":
        config = ObjectiveConfig("mle")
    elif method.startswith("map:"):
        config = ObjectiveConfig("map", float(method[4:]))
    else:
        raise ValidationError(f"unknown method {method!r}")
    fit = multistart_maximize(Objective(spec, hist, config), spec, plan, settings, threads, guesses)
    return fit


def _seed_for(base: int, k: int, stream: int) -> int:
    return int(np.random.SeedSequence(base, spawn_key=(k, stream)).generate_state(1, np.uint64)[0])


@dataclass
class SeedRecord:
    seed_index: int
    method: str
    total_photons: int
    theta_hat: np.ndarray
    error: np.ndarray
    nrmse: float
    converged: bool
    interior: bool
    wall_time: float
    peak_ratio: Optional[float] = None


@dataclass
class MethodStats:
    bias: Dict[str, float]
    variance: Dict[str, float]
    median_abs_error: Dict[str, float]
    median_rel_abs_error: Dict[str, float]
    median_nrmse: float
    success_rate: float
    wall_time_mean: float
    wall_time_median: float
    wall_time_max: float
    n_seeds: int


@dataclass
class EnsembleBenchmark:
    names: List[str]
    theta_true: Dict[str, float]  # at the benchmark time scale
    photon_budget: float
    time_scale: float
    seeds: List[int]
    methods: Dict[str, MethodStats]
    records: List[SeedRecord]
    failed_methods: List[str] = field(default_factory=list)
    note: str = REFERENCE_NOTE

    def records_for(self, method: str) -> List[SeedRecord]:
        return [r for r in self.records if r.method == method]

    def median_abs_error(self, method: str, name: str) -> float:
        return self.methods[method].median_abs_error[name]


def _interior(spec: ModelSpec, theta: np.ndarray, margin: float = 1e-6) -> bool:
    u = UnitBox(spec).to_unit(theta)
    return bool(np.all((u > margin) & (u < 1.0 - margin)))


def _stats(names, recs: List[SeedRecord], theta_true: np.ndarray) -> MethodStats:
    err = np.array([r.error for r in recs])
    rel = np.abs(err) / np.where(theta_true != 0, np.abs(theta_true), 1.0)
    wt = np.array([r.wall_time for r in recs])
    ok = np.array([r.converged and r.interior for r in recs])
    var = err.var(axis=0, ddof=1) if len(recs) > 1 else np.zeros(len(names))
    return MethodStats(
        bias=dict(zip(names, map(float, err.mean(axis=0)))),
        variance=dict(zip(names, map(float, var))),
        median_abs_error=dict(zip(names, map(float, np.median(np.abs(err), axis=0)))),
        median_rel_abs_error=dict(zip(names, map(float, np.median(rel, axis=0)))),
        median_nrmse=float(np.median([r.nrmse for r in recs])),
        success_rate=float(ok.mean()),
        wall_time_mean=float(wt.mean()),
        wall_time_median=float(np.median(wt)),
        wall_time_max=float(wt.max()),
        n_seeds=len(recs),
    )


def run_ensemble_benchmark(spec: ModelSpec, theta_true, grid: DelayGrid, photon_budget: float,
                           methods: Sequence[str], seeds: Union[int, Sequence[int]], *,
                           base_seed: int = 0, restarts: int = 64, guess_strategy: str = "uniform",
                           settings: OptimizerSettings = OptimizerSettings(), threads=None,
                           start_at_truth: bool = False, amplitudes: Sequence[str] = ()) -> EnsembleBenchmark:
    """Paired comparison of estimators on histograms drawn from one ground truth.

    Seed index ``k`` draws histogram ``k`` from ``substream(base_seed, k)``
    at ``T = photon_budget / sum(y(theta_true))``; every method fits that
    same histogram with a restart plan seeded from ``(base_seed, k)`` only,
    so adding or removing methods never changes another method's numbers.
    ``amplitudes`` names the parameters that scale with T (the ground truth
    for errors is ``theta_true`` with those scaled). ``start_at_truth``
    replaces the guesses with the scaled truth (one restart).
    """
    if not photon_budget > 0:
        raise ValidationError("photon_budget must be positive")
    labels = parse_methods(methods) if isinstance(methods, str) else list(methods)
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    theta_true = np.asarray(theta_true, dtype=float)
    truth_curve = evaluate(spec, theta_true, grid)
    T = photon_budget / float(truth_curve.sum())
    rate = truth_curve * T
    scaled = theta_true.copy()
    for name in amplitudes:
        scaled[spec.index(name)] *= T

    records: List[SeedRecord] = []
    for k in seed_list:
        hist = Histogram(grid, sample_poisson(rate, substream(base_seed, k)))
        fspec = refit_spec(spec, hist)
        plan = MultiStartPlan(1 if start_at_truth else restarts, _seed_for(base_seed, k, 1), guess_strategy)
        guesses = np.clip(scaled, fspec.lower, fspec.upper)[None, :] if start_at_truth else None
        for label in labels:
            t0 = time.perf_counter()
            fit = fit_histogram(label, fspec, hist, plan, settings, threads, guesses)
            wall = time.perf_counter() - t0
            ratio = center_peak_ratio(fspec, fit.theta_hat) if spec.kind == "pulsed" else None
            records.append(SeedRecord(k, label, hist.total_photons, fit.theta_hat, fit.theta_hat - scaled,
                                      nrmse(fit.fitted_curve, rate), fit.converged,
                                      _interior(fspec, fit.theta_hat), wall, ratio))

    stats = {}
    failed = []
    for label in labels:
        recs = [r for r in records if r.method == label]
        stats[label] = _stats(spec.names, recs, scaled)
        if not any(r.converged for r in recs):
            failed.append(label)
    return EnsembleBenchmark(spec.names, dict(zip(spec.names, map(float, scaled))), float(photon_budget),
                             T, seed_list, stats, records, failed)
