import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf
from mpmath import exp as mexp

from g2fit import (DelayGrid, LayoutError, ModelSpec, ParamSpec, PulsedEmitterParams, PulsedEmitterSpec,
                   ThermalSumParams, ThermalSumSpec, TruncationError, ValidationError, default_truncation,
                   eval_pulsed, eval_thermal, evaluate, pulsed_model, thermal_model)
from g2fit.models import truncation_tail_bound, with_bounds

# high-precision closed forms, frozen
PULSED_N1_AT_ZERO = 1.000090799859525  # 1 + 2 e^-10
PULSED_N2_AT_PERIOD = 1.0000454019910097  # e^-20 + 1 + e^-10 + e^-30
THERMAL_AT_ONE = 2.213061319425267  # 1 + 2 e^-1/2


def single(tau, bw=1.0):
    return DelayGrid(np.array([float(tau)]), bw)


def mp_pulsed(tau, c0, c1, c2, g1, g2, lam, n_side):
    mp.dps = 40
    tau = mpf(tau)
    side = sum(mexp(-mpf(g2) * abs(tau - n * mpf(lam))) for n in range(-n_side, n_side + 1) if n != 0)
    return float(c0 + c1 * mexp(-mpf(g1) * abs(tau)) * (c2 * mexp(-mpf(g2) * abs(tau)) + side))


class TestDelayGrid:
    def test_centered_is_symmetric(self):
        g = DelayGrid.centered(4, 0.5)
        np.testing.assert_array_equal(g.tau, [-0.75, -0.25, 0.25, 0.75])
        assert g.tau_max == 0.75

    @pytest.mark.parametrize("tau", [[], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0, 2.5]])
    def test_rejects_bad_grids(self, tau):
        with pytest.raises(ValidationError):
            DelayGrid(np.array(tau), 1.0)

    def test_rejects_non_positive_width(self):
        with pytest.raises(ValidationError):
            DelayGrid(np.array([0.0]), 0.0)

    def test_spacing_tolerance(self):
        DelayGrid(np.array([0.0, 1.0, 2.0 + 1e-12]), 1.0)
        with pytest.raises(ValidationError, match="index 2"):
            DelayGrid(np.array([0.0, 1.0, 2.0 + 1e-6]), 1.0)

    def test_tau_is_read_only(self):
        g = DelayGrid.centered(3)
        with pytest.raises(ValueError):
            g.tau[0] = 5.0


class TestEvalPulsed:
    def test_zero_amplitude_gives_background(self):
        p = PulsedEmitterParams(0.3, 0.0, 0.7, 0.1, 1.0, 10.0)
        y = eval_pulsed(p, PulsedEmitterSpec(2), DelayGrid.centered(5))
        np.testing.assert_array_equal(y, [0.3] * 5)

    def test_single_side_pulse_at_origin(self):
        p = PulsedEmitterParams(0.0, 1.0, 1.0, 0.0, 1.0, 10.0)
        y = eval_pulsed(p, PulsedEmitterSpec(1), single(0.0))
        assert y[0] == pytest.approx(PULSED_N1_AT_ZERO, rel=1e-14)

    def test_two_side_pulses_at_one_period(self):
        p = PulsedEmitterParams(0.0, 1.0, 0.0, 0.0, 1.0, 10.0)
        y = eval_pulsed(p, PulsedEmitterSpec(2), single(10.0))
        assert y[0] == pytest.approx(PULSED_N2_AT_PERIOD, rel=1e-14)

    @pytest.mark.parametrize("bad", [dict(c1=-1.0), dict(gamma2=0.0), dict(Lambda=-1.0), dict(c0=math.nan)])
    def test_bad_parameter_is_named(self, bad):
        base = dict(c0=0.0, c1=1.0, c2=1.0, gamma1=0.0, gamma2=1.0, Lambda=10.0)
        base.update(bad)
        name = next(iter(bad))
        with pytest.raises(ValidationError, match=name):
            eval_pulsed(PulsedEmitterParams(**base), PulsedEmitterSpec(2), single(0.0))

    def test_truncation_coverage(self):
        p = PulsedEmitterParams(0.0, 1.0, 1.0, 0.0, 1.0, 10.0)
        eval_pulsed(p, PulsedEmitterSpec(2), single(15.0))
        with pytest.raises(TruncationError):
            eval_pulsed(p, PulsedEmitterSpec(2), single(15.5))

    @settings(max_examples=60, deadline=None)
    @given(tau=st.floats(-40, 40), c0=st.floats(0, 5), c1=st.floats(0, 5), c2=st.floats(0, 3),
           g1=st.floats(0, 0.2), g2=st.floats(0.05, 3), lam=st.floats(5, 20), n_side=st.integers(3, 8))
    def test_matches_high_precision_sum(self, tau, c0, c1, c2, g1, g2, lam, n_side):
        p = PulsedEmitterParams(c0, c1, c2, g1, g2, lam)
        if abs(tau) > (n_side - 0.5) * lam:
            return
        y = eval_pulsed(p, PulsedEmitterSpec(n_side), single(tau))[0]
        assert y == pytest.approx(mp_pulsed(tau, c0, c1, c2, g1, g2, lam, n_side), rel=1e-12, abs=1e-300)


class TestEvalThermal:
    def test_origin_sums_amplitudes(self):
        p = ThermalSumParams(0.5, (1.0, 2.0), (0.3, 4.0))
        assert eval_thermal(p, ThermalSumSpec(2), single(0.0))[0] == pytest.approx(3.5, rel=1e-15)

    def test_zero_amplitudes_give_constant(self):
        p = ThermalSumParams(0.7, (0.0,), (2.0,))
        np.testing.assert_array_equal(eval_thermal(p, ThermalSumSpec(1), DelayGrid.centered(6)), [0.7] * 6)

    def test_closed_form(self):
        p = ThermalSumParams(1.0, (2.0,), (1.0,))
        assert eval_thermal(p, ThermalSumSpec(1), single(1.0))[0] == pytest.approx(THERMAL_AT_ONE, rel=1e-14)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_non_positive_width(self, sigma):
        with pytest.raises(ValidationError, match="sigma1"):
            eval_thermal(ThermalSumParams(1.0, (1.0,), (sigma,)), ThermalSumSpec(1), single(0.0))

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            eval_thermal(ThermalSumParams(1.0, (1.0, 2.0), (1.0,)), ThermalSumSpec(2), single(0.0))


class TestEvaluate:
    def test_pulsed_dispatch_is_bit_identical(self):
        grid = single(0.0)
        layout = [ParamSpec(n, 0.0, 100.0) for n in ("c0", "c1", "c2", "gamma1", "gamma2", "Lambda")]
        spec = ModelSpec(PulsedEmitterSpec(1), layout)
        p = PulsedEmitterParams(0.0, 1.0, 1.0, 0.0, 1.0, 10.0)
        direct = eval_pulsed(p, spec.variant, grid)
        np.testing.assert_array_equal(evaluate(spec, spec.pack(p), grid), direct)

    def test_thermal_dispatch(self):
        spec = thermal_model(DelayGrid.centered(8), 5.0)
        theta = spec.pack(ThermalSumParams(1.0, (2.0,), (1.0,)))
        assert evaluate(spec, theta, single(1.0))[0] == pytest.approx(THERMAL_AT_ONE, rel=1e-14)

    @pytest.mark.parametrize("length", [0, 2, 4])
    def test_wrong_length(self, length):
        spec = thermal_model(DelayGrid.centered(8), 5.0)
        with pytest.raises(LayoutError):
            evaluate(spec, np.ones(length), DelayGrid.centered(8))

    def test_fixed_background_is_inserted(self):
        grid = DelayGrid.centered(8)
        spec = thermal_model(grid, 5.0, fixed_background=0.25)
        assert spec.names == ["c1", "sigma1"]
        y = evaluate(spec, [0.0, 1.0], grid)
        np.testing.assert_array_equal(y, np.full(8, 0.25))

    def test_layout_validation(self):
        with pytest.raises(LayoutError):
            ModelSpec(ThermalSumSpec(1), (ParamSpec("c0", 0, 1), ParamSpec("c1", 0, 1)))
        with pytest.raises(ValidationError):
            ModelSpec(ThermalSumSpec(1), (ParamSpec("c0", 0, 1), ParamSpec("c0", 0, 1), ParamSpec("sigma1", 1, 2)))
        with pytest.raises(ValidationError):
            ModelSpec(ThermalSumSpec(1), (ParamSpec("c0", 1, 1), ParamSpec("c1", 0, 1), ParamSpec("sigma1", 1, 2)))

    def test_default_regularized_mask_marks_amplitudes(self):
        grid = DelayGrid.centered(64)
        assert pulsed_model(grid, 10).regularized_mask.tolist() == [False, True, True, False, False, False]
        spec = thermal_model(grid, 10, num_gaussians=2)
        assert spec.names == ["c0", "c1", "c2", "sigma1", "sigma2"]
        assert spec.regularized_mask.tolist() == [False, True, True, False, False]

    def test_with_bounds_replaces_only_named(self):
        spec = thermal_model(DelayGrid.centered(8), 5.0)
        narrowed = with_bounds(spec, sigma1=(0.5, 2.0))
        assert narrowed.lower[2] == 0.5 and narrowed.upper[2] == 2.0
        np.testing.assert_array_equal(narrowed.lower[:2], spec.lower[:2])
        with pytest.raises(LayoutError):
            with_bounds(spec, nope=(0, 1))

    def test_default_bounds_follow_grid(self):
        grid = DelayGrid.centered(101, 0.5)  # tau_max = 25
        spec = pulsed_model(grid, 7)
        lo = dict(zip(spec.names, spec.lower))
        hi = dict(zip(spec.names, spec.upper))
        assert hi["c1"] == 70.0
        assert lo["gamma2"] == pytest.approx(1e-4 / 25) and hi["gamma2"] == 20.0
        assert (lo["Lambda"], hi["Lambda"]) == (1.0, 25.0)


def brute_truncation(tau_max, lam_lb):
    n = 1
    while (n - 1) * lam_lb < tau_max + lam_lb:
        n += 1
    return n


class TestDefaultTruncation:
    @pytest.mark.parametrize("tau_max,lam_lb,expected", [(50, 10, 7), (5, 10, 3), (0, 1, 2)])
    def test_examples(self, tau_max, lam_lb, expected):
        grid = DelayGrid(np.array([-tau_max, float(tau_max)]), 2.0 * tau_max) if tau_max else single(0.0)
        assert default_truncation(grid, lam_lb) == expected

    @settings(max_examples=200, deadline=None)
    @given(tau_max=st.floats(0, 1e4), lam_lb=st.floats(1e-3, 1e3))
    def test_matches_brute_force(self, tau_max, lam_lb):
        grid = single(tau_max)
        n = default_truncation(grid, lam_lb)
        assert n == brute_truncation(tau_max, lam_lb)
        # every grid point is inside the coverage window for any admissible period
        assert tau_max <= (n - 0.5) * lam_lb

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_bound(self, bad):
        with pytest.raises(ValidationError):
            default_truncation(single(1.0), bad)


pulsed_draws = st.builds(
    PulsedEmitterParams,
    c0=st.floats(0, 10), c1=st.floats(0, 10), c2=st.floats(0, 5), gamma1=st.floats(0, 0.5),
    gamma2=st.floats(0.01, 5), Lambda=st.floats(2, 30),
)


class TestProperties:
    @settings(max_examples=80, deadline=None)
    @given(p=pulsed_draws, n_bins=st.integers(1, 80))
    def test_pulsed_is_even_and_above_background(self, p, n_bins):
        grid = DelayGrid.centered(n_bins, 0.7)
        spec = PulsedEmitterSpec(default_truncation(grid, p.Lambda))
        y = eval_pulsed(p, spec, grid)
        np.testing.assert_allclose(y, y[::-1], rtol=1e-12, atol=0)
        assert np.all(y >= p.c0)

    @settings(max_examples=80, deadline=None)
    @given(c0=st.floats(0, 10), amps=st.lists(st.floats(0, 10), min_size=1, max_size=4),
           data=st.data(), n_bins=st.integers(1, 60))
    def test_thermal_even_floor_and_monotone(self, c0, amps, data, n_bins):
        sig = data.draw(st.lists(st.floats(0.05, 50), min_size=len(amps), max_size=len(amps)))
        p = ThermalSumParams(c0, tuple(amps), tuple(sig))
        grid = DelayGrid.centered(n_bins, 0.9)
        y = eval_thermal(p, ThermalSumSpec(len(amps)), grid)
        np.testing.assert_allclose(y, y[::-1], rtol=1e-12, atol=0)
        assert np.all(y >= c0)
        half = y[(n_bins - 1) // 2:] if n_bins % 2 else y[n_bins // 2:]
        assert np.all(np.diff(half) <= 1e-12 * np.max(y))

    @settings(max_examples=80, deadline=None)
    @given(p=pulsed_draws, extra=st.integers(1, 6), n_bins=st.integers(1, 100))
    def test_truncation_convergence(self, p, extra, n_bins):
        grid = DelayGrid.centered(n_bins, 0.5)
        n = default_truncation(grid, p.Lambda)
        base = eval_pulsed(p, PulsedEmitterSpec(n), grid)
        more = eval_pulsed(p, PulsedEmitterSpec(n + extra), grid)
        bound = truncation_tail_bound(p, n, grid.tau_max)
        assert np.all(np.abs(more - base) <= bound * (1 + 1e-9) + 1e-13 * np.max(more))
        assert np.all(more >= base - 1e-13 * np.max(more))

    @settings(max_examples=80, deadline=None)
    @given(c0=st.floats(0, 5), c1=st.floats(0.01, 10), c2=st.floats(0, 0.999),
           g2=st.floats(0.05, 5), lam=st.floats(2, 30))
    def test_antibunched_peak_ordering(self, c0, c1, c2, g2, lam):
        if lam * g2 < 5 or (1 - c2) < 1e-6:
            return
        p = PulsedEmitterParams(c0, c1, c2, 0.0, g2, lam)
        grid = DelayGrid(np.array([-lam, 0.0, lam]), lam)
        y = eval_pulsed(p, PulsedEmitterSpec(default_truncation(grid, lam)), grid)
        assert y[1] < y[2]
