import numpy as np
import pytest
from numpy.testing import assert_allclose

from wwb_adapt.optimize import AnnealConfig, anneal_maximize, anneal_maximize_batch, grid_scan


class TestGridScan:
    def test_monotone_best_at_upper_corner(self):
        x, fx, values = grid_scan(lambda p: p[:, 0], [0.0], [1.0], 11)
        assert x[0] == 1.0
        assert fx == 1.0

    def test_values_shape(self):
        _, _, values = grid_scan(lambda p: p.sum(axis=1), [0.0, 0.0], [1.0, 1.0], 7)
        assert values.shape == (49,)

    def test_includes_corners(self):
        seen = []
        grid_scan(lambda p: (seen.append(p.copy()), np.zeros(len(p)))[1], [0.0], [2.0], 5)
        pts = seen[0][:, 0]
        assert 0.0 in pts and 2.0 in pts

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            grid_scan(lambda p: p[:, 0], [0.0], [1.0], 1)


class TestAnnealMaximize:
    def test_quadratic_peak_location(self):
        f = lambda p: -((p[:, 0] - 0.3) ** 2)
        x, fx = anneal_maximize(f, [0.0], [1.0], AnnealConfig(seed=1))
        assert abs(x[0] - 0.3) < 1e-3

    def test_deterministic_given_seed(self):
        f = lambda p: np.sin(5 * p[:, 0]) * np.cos(3 * p[:, 1])
        cfg = AnnealConfig(seed=9)
        r1 = anneal_maximize(f, [0.0, 0.0], [2.0, 2.0], cfg)
        r2 = anneal_maximize(f, [0.0, 0.0], [2.0, 2.0], cfg)
        assert np.array_equal(r1[0], r2[0])
        assert r1[1] == r2[1]

    def test_constant_objective(self):
        x, fx = anneal_maximize(
            lambda p: np.full(len(p), 4.5), [0.0], [1.0], AnnealConfig(seed=0)
        )
        assert fx == 4.5
        assert 0.0 <= x[0] <= 1.0

    def test_never_below_grid_seed(self):
        rng = np.random.default_rng(17)
        for trial in range(10):
            coef = rng.normal(size=4)

            def f(p):
                return (
                    coef[0] * np.sin(coef[1] * p[:, 0])
                    + coef[2] * np.cos(coef[3] * p[:, 1])
                )

            cfg = AnnealConfig(seed=trial)
            _, grid_best, _ = grid_scan(f, [0.0, -1.0], [3.0, 1.0], cfg.grid_points_per_dim)
            _, fx = anneal_maximize(f, [0.0, -1.0], [3.0, 1.0], cfg)
            assert fx >= grid_best

    def test_respects_box(self):
        f = lambda p: p[:, 0] + p[:, 1]  # pushes to the corner
        x, _ = anneal_maximize(f, [-1.0, 2.0], [1.0, 3.0], AnnealConfig(seed=2))
        assert -1.0 <= x[0] <= 1.0
        assert 2.0 <= x[1] <= 3.0

    def test_all_invalid_raises(self):
        with pytest.raises(ValueError):
            anneal_maximize(
                lambda p: np.full(len(p), -np.inf), [0.0], [1.0], AnnealConfig(seed=0)
            )

    def test_partial_invalid_handled(self):
        def f(p):
            return np.where(p[:, 0] > 0.5, -((p[:, 0] - 0.8) ** 2), -np.inf)

        x, fx = anneal_maximize(f, [0.0], [1.0], AnnealConfig(seed=3))
        assert abs(x[0] - 0.8) < 1e-3


class TestAnnealBatch:
    def test_independent_problems(self):
        centers = np.array([0.2, 0.5, 0.9])

        def f(points, rows):
            c = centers if rows is None else centers[rows]
            return -((points[..., 0] - c[:, None]) ** 2)

        lower = np.zeros((3, 1))
        upper = np.ones((3, 1))
        x, fx = anneal_maximize_batch(f, lower, upper, AnnealConfig(seed=5))
        assert_allclose(x[:, 0], centers, atol=1e-3)

    def test_batch_deterministic(self):
        def f(points, rows):
            return np.sin(4 * points[..., 0])

        cfg = AnnealConfig(seed=8)
        a = anneal_maximize_batch(f, np.zeros((4, 1)), np.ones((4, 1)), cfg)
        b = anneal_maximize_batch(f, np.zeros((4, 1)), np.ones((4, 1)), cfg)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])


class TestAnnealConfig:
    def test_cooling_validation(self):
        with pytest.raises(ValueError):
            AnnealConfig(cooling=1.0)
        with pytest.raises(ValueError):
            AnnealConfig(cooling=0.0)

    def test_particle_validation(self):
        with pytest.raises(ValueError):
            AnnealConfig(n_particles=0)
