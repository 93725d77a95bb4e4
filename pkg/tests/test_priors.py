import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import xi_monte_carlo
from wwb_adapt.filtering import ParticleSet
from wwb_adapt.priors import (
    GaussianPrior,
    UniformBoxPrior,
    approximate_from_particles,
    sample_prior,
    test_point_domain as point_domain,
    xi,
    xi_gaussian,
    xi_uniform,
)


class TestXiUniform:
    def test_full_overlap(self):
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        assert xi_uniform(prior, np.zeros(2), np.zeros(2)) == 1.0

    def test_empty_shifted_intersection(self):
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        v = np.array([1.0, 0.0])
        assert xi_uniform(prior, v, v) == 0.0

    def test_hand_computed_quarter(self):
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        v = np.array([0.25, np.pi / 2])
        assert xi_uniform(prior, v, -v) == pytest.approx(0.25)


class TestXiGaussian:
    def test_full_overlap(self):
        prior = GaussianPrior(mean=[0.0], variances=[1.0])
        assert xi_gaussian(prior, np.zeros(2), np.zeros(2)) == 1.0

    def test_bhattacharyya_one_sigma(self):
        sigma = 0.7
        prior = GaussianPrior(mean=[0.0], variances=[sigma**2])
        v = np.array([sigma, 0.0])
        assert xi_gaussian(prior, v, -v) == pytest.approx(np.exp(-0.5))

    def test_phase_half_overlap(self):
        prior = GaussianPrior(mean=[0.0], variances=[1.0])
        v = np.array([0.0, np.pi])
        assert xi_gaussian(prior, v, v) == pytest.approx(0.5)


class TestTestPointDomain:
    def test_uniform_box(self):
        dom = point_domain(UniformBoxPrior(center=[0.0], widths=[1.0]))
        assert_allclose(dom.lower, [-1.0, 0.0])
        assert_allclose(dom.upper, [1.0, 2 * np.pi])

    def test_gaussian_six_sigma(self):
        dom = point_domain(GaussianPrior(mean=[0.0], variances=[0.25]))
        assert_allclose(dom.lower, [-3.0, 0.0])
        assert_allclose(dom.upper, [3.0, 2 * np.pi])

    def test_phase_lower_bound_zero(self):
        for prior in (
            UniformBoxPrior(center=[0.3], widths=[2.0]),
            GaussianPrior(mean=[-1.0], variances=[0.1]),
        ):
            assert point_domain(prior).lower[-1] == 0.0


class TestApproximateFromParticles:
    def _two_point_cloud(self):
        states = np.array([[0.0, 0.0], [2.0, 0.0]])
        return ParticleSet(states, np.array([0.5, 0.5]))

    def test_gaussian_two_point_moments(self):
        prior = approximate_from_particles(self._two_point_cloud(), "gaussian")
        assert_allclose(prior.mean, [1.0])
        assert_allclose(prior.variances, [1.0])

    def test_uniform_matches_variance(self):
        prior = approximate_from_particles(self._two_point_cloud(), "uniform")
        assert_allclose(prior.widths, [np.sqrt(12.0)])
        assert_allclose(prior.frequency_variances, [1.0])

    def test_inflation_doubles_variance(self):
        base = approximate_from_particles(self._two_point_cloud(), "gaussian")
        inflated = approximate_from_particles(self._two_point_cloud(), "gaussian", 2.0)
        assert_allclose(inflated.variances, 2.0 * base.variances)

    def test_zero_variance_fallback(self):
        states = np.tile([[0.5, 0.0]], (8, 1))
        cloud = ParticleSet(states, np.full(8, 0.125))
        uprior = approximate_from_particles(cloud, "uniform")
        gprior = approximate_from_particles(cloud, "gaussian")
        assert uprior.widths[0] == pytest.approx(1e-6)
        assert gprior.variances[0] == pytest.approx(1e-12)

    def test_rejects_deflation(self):
        with pytest.raises(ValueError):
            approximate_from_particles(self._two_point_cloud(), "uniform", 0.5)


def _random_pair(rng, q):
    return rng.uniform(-1.5, 1.5, size=q), rng.uniform(-1.5, 1.5, size=q)


class TestXiProperties:
    @pytest.mark.parametrize(
        "prior",
        [
            UniformBoxPrior(center=[0.0], widths=[1.3]),
            UniformBoxPrior(center=[0.2, -0.4], widths=[1.0, 2.0]),
            GaussianPrior(mean=[0.0], variances=[0.5]),
            GaussianPrior(mean=[1.0, 0.0], variances=[0.5, 0.2]),
        ],
    )
    def test_point_reflection_symmetry(self, prior):
        rng = np.random.default_rng(100)
        q = prior.n_params
        for _ in range(100):
            v, vt = _random_pair(rng, q)
            assert xi(prior, v, vt) == pytest.approx(xi(prior, -v, -vt), abs=1e-15)

    @pytest.mark.parametrize(
        "prior",
        [
            UniformBoxPrior(center=[0.0], widths=[1.3]),
            GaussianPrior(mean=[0.0], variances=[0.5]),
        ],
    )
    def test_bounded_and_normalized(self, prior):
        rng = np.random.default_rng(101)
        q = prior.n_params
        vals = [xi(prior, *_random_pair(rng, q)) for _ in range(300)]
        assert np.all(np.asarray(vals) >= 0.0)
        assert np.all(np.asarray(vals) <= 1.0)
        assert xi(prior, np.zeros(q), np.zeros(q)) == 1.0

    def test_mean_independence(self):
        rng = np.random.default_rng(102)
        for _ in range(50):
            v, vt = _random_pair(rng, 2)
            width = rng.uniform(0.5, 2.0)
            var = rng.uniform(0.1, 1.0)
            for shift in (0.0, -3.7, 11.0):
                u0 = xi_uniform(UniformBoxPrior(center=[shift], widths=[width]), v, vt)
                u1 = xi_uniform(UniformBoxPrior(center=[0.0], widths=[width]), v, vt)
                assert abs(u0 - u1) <= 1e-14
                g0 = xi_gaussian(GaussianPrior(mean=[shift], variances=[var]), v, vt)
                g1 = xi_gaussian(GaussianPrior(mean=[0.0], variances=[var]), v, vt)
                assert abs(g0 - g1) <= 1e-14

    @pytest.mark.parametrize(
        "prior",
        [
            UniformBoxPrior(center=[0.1], widths=[1.4]),
            GaussianPrior(mean=[-0.2], variances=[0.4]),
        ],
    )
    def test_against_monte_carlo_integral(self, prior):
        # Gaussian shifts are kept within 2 sigma: the importance ratio of
        # the MC estimator gets heavy-tailed for larger shifts and would
        # need far more samples than the stated tolerance budget.
        rng = np.random.default_rng(103)
        draws = np.random.default_rng(104)
        for _ in range(100):
            scale = (
                prior.widths[0]
                if isinstance(prior, UniformBoxPrior)
                else 2 * np.sqrt(prior.variances[0])
            )
            v = np.array([rng.uniform(-scale, scale), rng.uniform(-np.pi, np.pi)])
            vt = np.array([rng.uniform(-scale, scale), rng.uniform(-np.pi, np.pi)])
            exact = xi(prior, v, vt)
            approx = xi_monte_carlo(prior, v, vt, 400_000, draws)
            assert abs(exact - approx) < 3e-3


class TestSamplePrior:
    def test_uniform_support(self):
        prior = UniformBoxPrior(center=[1.0], widths=[0.5])
        rng = np.random.default_rng(3)
        s = sample_prior(prior, 5000, rng)
        assert np.all(s[:, 0] >= 0.75) and np.all(s[:, 0] <= 1.25)
        assert np.all(np.abs(s[:, 1]) <= np.pi)

    def test_gaussian_moments(self):
        prior = GaussianPrior(mean=[2.0], variances=[0.09])
        rng = np.random.default_rng(4)
        s = sample_prior(prior, 200_000, rng)
        assert s[:, 0].mean() == pytest.approx(2.0, abs=5e-3)
        assert s[:, 0].var() == pytest.approx(0.09, rel=0.05)
