"""``g2fit`` command line: fit, simulate, evaluate, benchmark.

Exit codes: 0 success, 1 input/data error, 2 best-effort result without
convergence, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import AlignmentError, FormatError, G2FitError
from .fixtures import fixture_names, load_fixture
from .metrics import center_peak_ratio, metrics_report, parse_methods, run_ensemble_benchmark
from .models import evaluate, pulsed_model, thermal_model
from .objectives import Histogram, Objective, ObjectiveConfig
from .optim import MultiStartPlan, OptimizerSettings, multistart_maximize
from .sampler import SamplerConfig, sample_poisson, scale_signal, substream

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t.strip()]


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def build_fit_report(fit, spec, hist, config, plan, settings, *, unit=None, input_name=None,
                     input_digest=None, record_timing=False) -> dict:
    theta = fit.as_dict()
    metrics = {"total_photons": hist.total_photons, "photons_per_bin": hist.total_photons / len(hist.counts)}
    if spec.kind == "pulsed":
        metrics["center_peak_ratio"] = center_peak_ratio(spec, fit.theta_hat)
    order = sorted(fit.restart_records, key=lambda r: (-r.final_value, r.index))
    top = [
        {"index": r.index, "final_value": r.final_value, "iterations": r.iterations, "converged": r.converged,
         "guess": dict(zip(spec.names, map(float, r.guess))),
         "theta": dict(zip(spec.names, map(float, r.theta)))}
        for r in order if r.theta is not None
    ]
    report = {
        "schema_version": io.SCHEMA_VERSION,
        "model": io.spec_to_dict(spec),
        "unit": unit,
        "theta_hat": theta,
        "objective": {"kind": fit.objective_kind, "value": fit.objective_value, "lambda": config.lam},
        "converged": fit.converged,
        "restarts": {
            "count": len(fit.restart_records),
            "converged": sum(r.converged for r in fit.restart_records),
            "seed": plan.seed,
            "strategy": plan.guess_strategy,
            "top": top,
        },
        "grid": {"bin_width": hist.grid.bin_width, "n_bins": len(hist.grid)},
        "curve": {"tau": hist.tau.tolist(), "y": fit.fitted_curve.tolist(), "counts": hist.counts.tolist()},
        "metrics": metrics,
        "provenance": {
            "input": input_name,
            "input_sha256": input_digest,
            "seed": plan.seed,
            "settings": {"xtol": settings.xtol, "ftol": settings.ftol, "max_iters": settings.max_iters,
                         "max_line_evals": settings.max_line_evals},
        },
    }
    if record_timing:
        report["provenance"]["wall_time"] = fit.wall_time
    return report


def cmd_fit(args) -> int:
    hist, unit = io.read_histogram(args.input, return_unit=True)
    if args.model == "pulsed":
        if args.n_gaussians is not None:
            raise UsageError("--n-gaussians applies to the thermal model only")
        spec = pulsed_model(hist.grid, hist.counts.max(), args.n_side_pulses, args.fix_background)
    else:
        spec = thermal_model(hist.grid, hist.counts.max(), args.n_gaussians or 1, args.fix_background)
    lam = args.lam if args.lam is not None else 0.0
    config = ObjectiveConfig("map", lam) if lam > 0 else ObjectiveConfig("mle")
    plan = MultiStartPlan(args.restarts, args.seed, args.strategy)
    settings = OptimizerSettings()
    t0 = time.perf_counter()
    fit = multistart_maximize(Objective(spec, hist, config), spec, plan, settings, threads=args.threads)
    fit.wall_time = time.perf_counter() - t0
    report = build_fit_report(fit, spec, hist, config, plan, settings, unit=unit, input_name=Path(args.input).name,
                              input_digest=io.file_digest(args.input), record_timing=args.record_timing)
    io.write_fit_report(args.output, report)
    status = "converged" if fit.converged else "NOT converged"
    print(f"objective={fit.objective_value:.6f} photons={hist.total_photons} wall={fit.wall_time:.2f}s {status}")
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _source_curve(args):
    if args.report:
        rep = io.read_fit_report(args.report)
        grid = io.grid_from_dict({"tau": rep["curve"]["tau"], "bin_width": rep["grid"]["bin_width"]})
        return grid, np.asarray(rep["curve"]["y"], dtype=float), rep.get("unit"), str(Path(args.report).name)
    d = io.read_json(args.params)
    try:
        grid = io.grid_from_dict(d["grid"])
        model = d["model"]
        if model["kind"] == "pulsed":
            spec = pulsed_model(grid, 1.0, model.get("n_side_pulses"), model.get("fixed_background"))
        elif model["kind"] == "thermal":
            spec = thermal_model(grid, 1.0, int(model.get("num_gaussians", 1)), model.get("fixed_background"))
        else:
            raise FormatError(f"unknown model kind {model['kind']!r}")
        y = evaluate(spec, spec.pack(d["theta"]), grid)
    except KeyError as exc:
        raise FormatError(f"params file missing {exc.args[0]!r}") from None
    unit = d.get("unit") or d["grid"].get("unit")
    return grid, y, unit, str(Path(args.params).name)


def cmd_simulate(args) -> int:
    if bool(args.report) == bool(args.params):
        raise UsageError("exactly one of --report or --params is required")
    grid, y, unit, source = _source_curve(args)
    config = SamplerConfig(args.time_scale, args.seed, args.replicates)
    rate = scale_signal(y, config.time_scale)
    outdir = Path(args.outdir)
    entries = []
    for k in range(config.n_replicates):
        counts = sample_poisson(rate, substream(config.seed, k))
        name = f"replicate_{k:04d}.csv"
        io.write_histogram(outdir / name, Histogram(grid, counts), unit)
        entries.append({"file": name, "replicate": k, "total_photons": int(counts.sum())})
    manifest = {"schema_version": io.SCHEMA_VERSION, "source": source, "time_scale": config.time_scale,
                "seed": config.seed, "expected_total": float(rate.sum()), "replicates": entries}
    io.write_json(outdir / "manifest.json", manifest)
    totals = [e["total_photons"] for e in entries]
    print(f"wrote {len(entries)} histograms to {outdir} (mean total {np.mean(totals):.1f})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _reference_curve(path: str):
    p = Path(path)
    if p.suffix.lower() == ".json":
        d = io.read_json(p)
        if "curve" in d:
            return np.asarray(d["curve"]["tau"], dtype=float), np.asarray(d["curve"]["y"], dtype=float)
        if "tau" in d and "y" in d:
            return np.asarray(d["tau"], dtype=float), np.asarray(d["y"], dtype=float)
        raise FormatError("reference JSON needs 'tau' and 'y' (or a fit report)")
    hist = io.read_histogram(p)
    return hist.tau, hist.counts.astype(float)


def cmd_evaluate(args) -> int:
    rep = io.read_fit_report(args.fit)
    tau = np.asarray(rep["curve"]["tau"], dtype=float)
    est = np.asarray(rep["curve"]["y"], dtype=float)
    ref_tau, ref = _reference_curve(args.reference)
    if ref_tau.shape != tau.shape or not np.allclose(ref_tau, tau, rtol=1e-9, atol=1e-12 * max(1.0, np.abs(tau).max())):
        raise AlignmentError("fit and reference are defined on different delay grids")
    if args.subtract_background:
        bg = rep["theta_hat"].get("c0", rep["model"].get("fixed_background")) or 0.0
        est = est - bg
        ref = ref - bg
    report = metrics_report(est, ref, rep["curve"].get("counts"))
    out = report.as_dict()
    out["background_subtracted"] = bool(args.subtract_background)
    text = io.dumps(out)
    if args.output:
        io.atomic_write_text(args.output, text)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_benchmark(outdir: Path, bench, fixture: str) -> None:
    names = bench.names
    rows = []
    for r in bench.records:
        rows.append([r.seed_index, r.method, r.total_photons, *map(repr, map(float, r.theta_hat)),
                     *map(repr, map(float, r.error)), repr(r.nrmse), int(r.converged), int(r.interior),
                     "" if r.peak_ratio is None else repr(r.peak_ratio)])
    header = (["seed", "method", "total_photons"] + [f"{n}_hat" for n in names] + [f"{n}_error" for n in names]
              + ["nrmse", "converged", "interior", "center_peak_ratio"])
    io.atomic_write_text(outdir / "per_seed.csv", _csv_text(header, rows))

    rows = []
    for label, st in bench.methods.items():
        for n in names:
            rows.append([label, n, repr(st.bias[n]), repr(st.variance[n]), repr(st.median_abs_error[n]),
                         repr(st.median_rel_abs_error[n])])
    io.atomic_write_text(outdir / "method_stats.csv",
                         _csv_text(["method", "parameter", "bias", "variance", "median_abs_error",
                                    "median_rel_abs_error"], rows))

    summary = {
        "schema_version": io.SCHEMA_VERSION,
        "note": bench.note,
        "fixture": fixture,
        "photon_budget": bench.photon_budget,
        "time_scale": bench.time_scale,
        "seeds": bench.seeds,
        "theta_true": bench.theta_true,
        "failed_methods": bench.failed_methods,
        "methods": {
            label: {"success_rate": st.success_rate, "median_nrmse": st.median_nrmse,
                    "median_abs_error": st.median_abs_error, "median_rel_abs_error": st.median_rel_abs_error,
                    "bias": st.bias, "variance": st.variance, "n_seeds": st.n_seeds}
            for label, st in bench.methods.items()
        },
    }
    io.write_json(outdir / "summary.json", summary)
    # wall-clock numbers vary run to run, so they live apart from the deterministic outputs
    timing = {label: {"mean": st.wall_time_mean, "median": st.wall_time_median, "max": st.wall_time_max}
              for label, st in bench.methods.items()}
    io.write_json(outdir / "timing.json", timing)


def cmd_benchmark(args) -> int:
    try:
        labels = parse_methods(args.methods, args.lambda_grid)
    except G2FitError as exc:
        raise UsageError(str(exc)) from None
    if args.seeds < 30:
        print(f"warning: {args.seeds} seeds is below 30; variance estimates will be unstable", file=sys.stderr)
    fx = load_fixture(args.fixture)
    bench = run_ensemble_benchmark(fx.spec, fx.theta, fx.grid, args.budget, labels, args.seeds,
                                   base_seed=args.base_seed, restarts=args.restarts, threads=args.threads,
                                   amplitudes=fx.amplitudes)
    outdir = Path(args.outdir)
    write_benchmark(outdir, bench, args.fixture)
    for label, st in bench.methods.items():
        med = ", ".join(f"{k}={v:.3g}" for k, v in st.median_rel_abs_error.items())
        print(f"{label}: success={st.success_rate:.2f} median_nrmse={st.median_nrmse:.4f} median_rel_err[{med}]")
    if bench.failed_methods:
        print(f"warning: no converged fits for {', '.join(bench.failed_methods)}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="g2fit", description="Few-photon G2(tau) reconstruction by Poisson MAP estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    f = sub.add_parser("fit", help="fit an ansatz to a histogram CSV")
    f.add_argument("--input", required=True)
    f.add_argument("--model", required=True, choices=["pulsed", "thermal"])
    f.add_argument("--lambda", dest="lam", type=float, default=None, help="L1 weight; 0 or omitted means MLE")
    f.add_argument("--restarts", type=_positive_int, default=64)
    f.add_argument("--seed", type=_u64, default=0)
    f.add_argument("--strategy", choices=["uniform", "lhs"], default="uniform")
    f.add_argument("--fix-background", type=float, default=None)
    f.add_argument("--n-gaussians", type=_positive_int, default=None)
    f.add_argument("--n-side-pulses", type=_positive_int, default=None)
    f.add_argument("--threads", type=_positive_int, default=None)
    f.add_argument("--record-timing", action="store_true", help="store wall time in the report")
    f.add_argument("--output", required=True)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="Poisson-sample histograms from a fit or parameter file")
    s.add_argument("--report")
    s.add_argument("--params")
    s.add_argument("--time-scale", type=float, default=1.0)
    s.add_argument("--replicates", type=_positive_int, default=1)
    s.add_argument("--seed", type=_u64, default=0)
    s.add_argument("--outdir", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="NRMSE of a fitted curve against a reference")
    e.add_argument("--fit", required=True)
    e.add_argument("--reference", required=True)
    e.add_argument("--subtract-background", action="store_true")
    e.add_argument("--output")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="paired MAP/MLE/LSQ comparison on a synthetic fixture")
    b.add_argument("--fixture", required=True, choices=fixture_names())
    b.add_argument("--budget", type=float, required=True)
    b.add_argument("--seeds", type=_positive_int, default=30)
    b.add_argument("--methods", default="map,mle,lsq")
    b.add_argument("--lambda-grid", type=_floats, default=[0.0])
    b.add_argument("--restarts", type=_positive_int, default=64)
    b.add_argument("--base-seed", type=_u64, default=0)
    b.add_argument("--threads", type=_positive_int, default=None)
    b.add_argument("--outdir", required=True)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"g2fit {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (G2FitError, OSError) as exc:
        print(f"g2fit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
