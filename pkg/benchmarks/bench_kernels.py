"""Compare the numba-compiled kernels with their numpy fallbacks.

Kernel timings call both implementations directly in this process. The
end-to-end fit timing runs one subprocess per backend, selected with
``G2FIT_DISABLE_NUMBA``, so it measures what a user of either path sees.

    python benchmarks/bench_kernels.py [--bins 256] [--repeat 7] [--json out.json]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from g2fit import _kernels, load_fixture
from g2fit._accel import USE_NUMBA

FIT_SNIPPET = """
import json, time
import g2fit
from g2fit import Histogram, MultiStartPlan, Objective, load_fixture, multistart_maximize, sample_poisson
from g2fit.metrics import refit_spec
fx = load_fixture("pulsed")
h = Histogram(fx.grid, sample_poisson(fx.curve() * fx.time_scale(500), 1))
spec = refit_spec(fx.spec, h)
multistart_maximize(Objective(spec, h), spec, MultiStartPlan(1, 0))  # warm-up / compile
t = time.perf_counter()
fit = multistart_maximize(Objective(spec, h), spec, MultiStartPlan({restarts}, 0))
print(json.dumps({{"backend": g2fit.backend(), "seconds": time.perf_counter() - t,
                  "objective": fit.objective_value}}))
"""


def best_of(fn, repeat, number):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(n_bins):
    fx = load_fixture("pulsed")
    tau = np.ascontiguousarray(fx.grid.tau[:n_bins] if n_bins <= len(fx.grid) else
                               (np.arange(n_bins) - (n_bins - 1) / 2.0))
    p = fx.spec.as_dict(fx.theta)
    n_side = fx.spec.variant.n_side_pulses
    pulsed_args = (tau, p["c0"], p["c1"], p["c2"], p["gamma1"], p["gamma2"], p["Lambda"], n_side)
    thermal_args = (tau, 1.0, np.array([1.0, 0.5]), np.array([1.5, 8.0]))
    rng = np.random.default_rng(0)
    y = rng.uniform(0.01, 20.0, n_bins)
    n = rng.poisson(y).astype(np.int64)
    rate = rng.uniform(0.0, 29.0, n_bins)
    u = rng.random(n_bins)
    lam = rng.uniform(30.0, 1e4, n_bins)
    v = rng.random(n_bins)

    def inversion(kernel):
        out = np.zeros(n_bins, dtype=np.int64)
        return lambda: kernel(rate, u, out)

    def ptrs(kernel):
        out = np.zeros(n_bins, dtype=np.int64)
        acc = np.zeros(n_bins, dtype=bool)

        def go():
            acc[:] = False
            kernel(lam, u, v, out, acc)
        return go

    return [
        ("pulsed curve", lambda: _kernels.pulsed_loop(*pulsed_args), lambda: _kernels.pulsed_np(*pulsed_args)),
        ("thermal curve", lambda: _kernels.thermal_loop(*thermal_args), lambda: _kernels.thermal_np(*thermal_args)),
        ("poisson loglik", lambda: _kernels.loglik_loop(y, n), lambda: _kernels.loglik_np(y, n)),
        ("inversion sampler", inversion(_kernels.inversion_loop), inversion(_kernels.inversion_np)),
        ("PTRS sampler step", ptrs(_kernels.ptrs_step_loop), ptrs(_kernels.ptrs_step_np)),
    ]


def fit_timing(restarts, disable_numba):
    env = dict(os.environ)
    if disable_numba:
        env["G2FIT_DISABLE_NUMBA"] = "1"
    else:
        env.pop("G2FIT_DISABLE_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(restarts=restarts)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bins", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--number", type=int, default=200)
    ap.add_argument("--fit-restarts", type=int, default=8, help="0 skips the end-to-end fit timing")
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)

    if not USE_NUMBA:
        print("numba is disabled or missing: the 'numba' column runs the same loops as plain Python")
    rows = []
    print(f"{'kernel':<20}{'numba [us]':>12}{'numpy [us]':>12}{'speed-up':>10}   ({args.bins} bins)")
    for name, fast, slow in kernel_cases(args.bins):
        fast()  # compile outside the timed region
        slow()
        number = args.number if USE_NUMBA else max(1, args.number // 50)
        tf = best_of(fast, args.repeat, number)
        ts = best_of(slow, args.repeat, args.number)
        rows.append({"kernel": name, "numba_s": tf, "numpy_s": ts, "speedup": ts / tf})
        print(f"{name:<20}{tf * 1e6:>12.2f}{ts * 1e6:>12.2f}{ts / tf:>10.2f}")

    result = {"bins": args.bins, "kernels": rows}
    if args.fit_restarts:
        fast = fit_timing(args.fit_restarts, disable_numba=False)
        slow = fit_timing(args.fit_restarts, disable_numba=True)
        result["fit"] = {"restarts": args.fit_restarts, "numba": fast, "numpy": slow}
        print(f"\npulsed fit, {args.fit_restarts} restarts: {fast['backend']} {fast['seconds']:.2f} s, "
              f"{slow['backend']} {slow['seconds']:.2f} s (speed-up {slow['seconds'] / fast['seconds']:.2f}); "
              f"objective gap {abs(fast['objective'] - slow['objective']):.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
