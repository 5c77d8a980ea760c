import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2fit import (ConfigurationError, DelayGrid, Histogram, ModelSpec, Objective, ObjectiveConfig, ParamSpec,
                   PulsedEmitterSpec, ValidationError, evaluate, laplace_logprior, loglik_grad_y, lsq_objective,
                   map_objective, poisson_loglik, pulsed_model, thermal_model)
from g2fit.sampler import sample_poisson

LOGLIK_2_3 = -0.3178687728757803  # 2 ln 2 + 3 ln 3 - 5


def hist_of(counts, bw=1.0):
    return Histogram(DelayGrid.centered(len(counts), bw), np.asarray(counts))


class TestHistogram:
    def test_total_photons(self):
        assert hist_of([3, 0, 5]).total_photons == 8

    @pytest.mark.parametrize("counts", [[1, -1], [1.5, 2], [1, 2, 3]])
    def test_rejects_bad_counts(self, counts):
        with pytest.raises(ValidationError):
            Histogram(DelayGrid.centered(2), np.asarray(counts))

    def test_integral_floats_accepted(self):
        h = Histogram(DelayGrid.centered(2), np.array([1.0, 4.0]))
        assert h.counts.dtype == np.int64

    def test_equality_ignores_provenance(self):
        a = Histogram(DelayGrid.centered(2), np.array([1, 2]), provenance={"seed": 1})
        assert a == hist_of([1, 2])


class TestPoissonLoglik:
    def test_examples(self):
        assert poisson_loglik([1.0, 1.0], [0, 0]) == -2.0
        assert poisson_loglik([1.0], [1]) == -1.0
        assert poisson_loglik([2.0, 3.0], [2, 3]) == pytest.approx(LOGLIK_2_3, rel=1e-14)

    def test_zero_rate_without_counts(self):
        assert poisson_loglik([0.0, 2.0], [0, 1]) == pytest.approx(math.log(2) - 2)

    @pytest.mark.parametrize("y", [[0.0, 1.0], [-1.0, 1.0]])
    def test_barrier(self, y):
        assert poisson_loglik(y, [1, 1]) == -math.inf

    def test_nan_is_an_error(self):
        with pytest.raises(ValidationError):
            poisson_loglik([math.nan], [1])

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            poisson_loglik([1.0, 2.0], [1])


class TestGradient:
    @pytest.mark.parametrize("n,y,g", [([1], [1.0], 0.0), ([0], [2.0], -1.0), ([4], [2.0], 1.0)])
    def test_examples(self, n, y, g):
        assert loglik_grad_y(y, n)[0] == g

    def test_barrier(self):
        assert loglik_grad_y([0.0], [2])[0] == -math.inf

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 500), st.floats(0.05, 500)), min_size=1, max_size=20))
    def test_matches_central_difference(self, pairs):
        n = np.array([p[0] for p in pairs])
        y = np.array([p[1] for p in pairs])
        g = loglik_grad_y(y, n)
        for i in range(len(y)):
            h = 1e-5 * y[i]
            fd = (poisson_loglik([y[i] + h], [n[i]]) - poisson_loglik([y[i] - h], [n[i]])) / (2 * h)
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(1, 1000), min_size=1, max_size=10))
    def test_maximum_at_counts(self, n):
        n = np.array(n)
        y = n.astype(float)
        np.testing.assert_array_equal(loglik_grad_y(y, n), 0.0)
        assert np.all(loglik_grad_y(0.9 * y, n) > 0)
        assert np.all(loglik_grad_y(1.1 * y, n) < 0)

    @pytest.mark.parametrize("y", [0.5, 3.0, 40.0, 1e4])
    def test_fisher_diagonal_is_inverse_rate(self, y):
        # expected information at n = y: -d(grad)/dy = n / y^2 = 1 / y
        h = 1e-4 * y
        n = np.array([y])
        fd = -(
            (n / (y + h) - 1.0) - (n / (y - h) - 1.0)
        ) / (2 * h)
        assert fd[0] == pytest.approx(1.0 / y, rel=1e-6)
        # the same through the library with integer counts at integral rates
        if float(y).is_integer():
            gp = loglik_grad_y([y + h], [int(y)])[0]
            gm = loglik_grad_y([y - h], [int(y)])[0]
            assert -(gp - gm) / (2 * h) == pytest.approx(1.0 / y, rel=1e-6)


@pytest.fixture
def thermal_spec():
    return thermal_model(DelayGrid.centered(2), 5.0)


class TestPrior:
    def test_zero_lambda(self, thermal_spec):
        assert laplace_logprior([1.0, 2.0, 3.0], thermal_spec, ObjectiveConfig("map", 0.0)) == 0.0

    def test_zero_subset(self, thermal_spec):
        assert laplace_logprior([4.0, 0.0, 3.0], thermal_spec, ObjectiveConfig("map", 3.0)) == 0.0

    def test_weighted_sum(self):
        spec = thermal_model(DelayGrid.centered(2), 5.0, num_gaussians=2)
        # layout c0, c1, c2, sigma1, sigma2; the regularised subset is (c1, c2)
        theta = [9.0, 0.5, -1.0, 1.0, 1.0]
        assert laplace_logprior(theta, spec, ObjectiveConfig("map", (1.0, 2.0))) == -2.5

    def test_length_mismatch(self, thermal_spec):
        with pytest.raises(ConfigurationError):
            laplace_logprior([1.0, 1.0, 1.0], thermal_spec, ObjectiveConfig("map", (1.0, 2.0)))

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            ObjectiveConfig("mle", 0.5)
        with pytest.raises(ConfigurationError):
            ObjectiveConfig("map", -1.0)
        with pytest.raises(ValueError):
            ObjectiveConfig("ridge")


def example_pulsed():
    # 11 bins in [-5, 5]; one side pulse per direction covers |tau| <= 5
    grid = DelayGrid.centered(11, 1.0)
    layout = [ParamSpec("c0", 0, 100), ParamSpec("c1", 0, 100, regularized=True),
              ParamSpec("c2", 0, 10, regularized=True), ParamSpec("gamma1", 0, 10), ParamSpec("gamma2", 0, 10),
              ParamSpec("Lambda", 1, 100)]
    spec = ModelSpec(PulsedEmitterSpec(1), layout)
    theta = np.array([0.0, 1.0, 1.0, 0.0, 1.0, 10.0])
    return grid, spec, theta


def straight_line_map(theta, tau, counts, lam):
    c0, c1, c2, g1, g2, L = theta
    total = 0.0
    for t, n in zip(tau, counts):
        y = c0 + c1 * math.exp(-g1 * abs(t)) * (
            c2 * math.exp(-g2 * abs(t)) + math.exp(-g2 * abs(t - L)) + math.exp(-g2 * abs(t + L)))
        total += n * math.log(y) - y
    return total - lam * (abs(c1) + abs(c2))


class TestMapObjective:
    def test_mle_is_bit_identical_to_loglik(self):
        grid, spec, theta = example_pulsed()
        counts = sample_poisson(20 * evaluate(spec, theta, grid), 7)
        h = Histogram(grid, counts)
        ll = poisson_loglik(evaluate(spec, theta, grid), counts)
        assert map_objective(theta, spec, h, ObjectiveConfig("mle")) == ll
        assert map_objective(theta, spec, h, ObjectiveConfig("map", 0.0)) == ll

    def test_constant_thermal(self, thermal_spec):
        assert map_objective([1.0, 0.0, 0.7], thermal_spec, hist_of([0, 0]), ObjectiveConfig()) == -2.0

    @pytest.mark.parametrize("lam", [0.0, 0.3, 5.0])
    def test_matches_straight_line_reimplementation(self, lam):
        grid, spec, theta = example_pulsed()
        counts = sample_poisson(20 * evaluate(spec, theta, grid), 7)
        assert counts.sum() > 0
        h = Histogram(grid, counts)
        for scale in (1.0, 12.0, 30.0):
            th = theta * np.array([1, scale, 1, 1, 1, 1])
            got = map_objective(th, spec, h, ObjectiveConfig("map", lam))
            want = straight_line_map(th, grid.tau, counts, lam)
            assert got == pytest.approx(want, rel=1e-10)
            assert Objective(spec, h, ObjectiveConfig("map", lam))(th) == pytest.approx(want, rel=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(lam=st.floats(0, 10), bump=st.floats(0, 10), which=st.integers(0, 1),
           c1=st.floats(0, 50), c2=st.floats(0, 5))
    def test_prior_monotone(self, lam, bump, which, c1, c2):
        grid, spec, theta = example_pulsed()
        theta[1:3] = c1, c2
        h = Histogram(grid, sample_poisson(20 * evaluate(spec, example_pulsed()[2], grid), 7))
        lo = [lam, lam]
        hi = list(lo)
        hi[which] += bump
        a = map_objective(theta, spec, h, ObjectiveConfig("map", tuple(lo)))
        b = map_objective(theta, spec, h, ObjectiveConfig("map", tuple(hi)))
        assert b <= a

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_invariant_under_bin_reordering(self, seed):
        grid, spec, theta = example_pulsed()
        counts = sample_poisson(20 * evaluate(spec, theta, grid), seed)
        perm = np.random.default_rng(seed).permutation(len(grid))
        y = evaluate(spec, theta, grid)
        a = poisson_loglik(y, counts)
        b = poisson_loglik(y[perm], counts[perm])
        assert b == pytest.approx(a, rel=1e-13, abs=1e-12)


class TestLsq:
    def test_perfect_fit(self, thermal_spec):
        grid = DelayGrid.centered(2)
        assert lsq_objective([3.0, 0.0, 1.0], thermal_spec, Histogram(grid, [3, 3])) == 0.0

    def test_zero_model(self, thermal_spec):
        assert lsq_objective([0.0, 0.0, 1.0], thermal_spec, hist_of([1, 1])) == -2.0

    def test_single_residual(self):
        # y = [2, 4] from a one-Gaussian curve: c0 = 2 plus a tiny-width peak at the second bin
        grid = DelayGrid(np.array([-1.0, 0.0]), 1.0)
        spec = thermal_model(grid, 5.0)
        assert lsq_objective([2.0, 2.0, 0.1], spec, Histogram(grid, [2, 3])) == pytest.approx(-1.0, rel=1e-12)

    def test_objective_class_agrees(self):
        grid = DelayGrid.centered(16, 0.5)
        spec = pulsed_model(grid, 30.0)
        h = Histogram(grid, np.arange(16) % 5)
        theta = (spec.lower + spec.upper) / 3
        assert Objective(spec, h, ObjectiveConfig("lsq"))(theta) == pytest.approx(lsq_objective(theta, spec, h),
                                                                                 rel=1e-13)
