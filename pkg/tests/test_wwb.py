import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import eta_acute_monte_carlo, q_from_defining_integrals
from wwb_adapt.errors import DegenerateBeliefError
from wwb_adapt.optimize import AnnealConfig, grid_scan
from wwb_adapt.priors import GaussianPrior, UniformBoxPrior
from wwb_adapt.priors import test_point_domain as point_domain
from wwb_adapt.signal_model import SamplingMatrix, uniform_linear_array
from wwb_adapt.wwb import (
    CostQuery,
    eta_acute,
    kp_wwb,
    rp_wwb,
    rp_wwb_batch,
    scaling_cost_curve,
    uc_wwb,
    wwb_cost,
)


def ula_sampling(n=12, spacing=np.pi):
    return SamplingMatrix.from_positions(uniform_linear_array(n, spacing))


class TestEtaAcute:
    def test_zero_shift_is_one(self):
        sm = ula_sampling(6)
        v = np.array([0.3, 1.0])
        assert eta_acute(sm, 2.0, v, v) == pytest.approx(1.0)

    def test_zero_snr_is_one(self):
        sm = ula_sampling(6)
        assert eta_acute(sm, 0.0, np.zeros(2), np.array([0.5, 2.0])) == 1.0

    def test_two_element_closed_value(self):
        # centered 2-element array, spacing pi: shift (1, 0) zeroes the sum
        sm = ula_sampling(2)
        for snr in (0.5, 1.0, 3.0):
            got = eta_acute(sm, snr, np.zeros(2), np.array([1.0, 0.0]))
            assert got == pytest.approx(np.exp(-snr))

    def test_against_monte_carlo(self):
        sm = ula_sampling(4)
        rng = np.random.default_rng(2024)
        v = np.zeros(2)
        vt = np.array([0.35, 0.8])
        exact = eta_acute(sm, 1.0, v, vt)
        mc = eta_acute_monte_carlo(sm.full(), 1.0, v, vt, 10**6, rng)
        assert abs(exact - mc) / exact < 0.01


class TestRpWwb:
    def _queries(self):
        sm = ula_sampling(12)
        return [
            CostQuery(prior=UniformBoxPrior(center=[0.0], widths=[1.0]), sampling=sm, snr=1.0),
            CostQuery(prior=GaussianPrior(mean=[0.0], variances=[0.1]), sampling=sm, snr=1.0),
        ]

    def test_symmetry_under_negation(self):
        rng = np.random.default_rng(55)
        for query in self._queries():
            dom = point_domain(query.prior)
            count = 0
            while count < 100:
                h = rng.uniform(dom.lower, dom.upper)
                h[0] = rng.uniform(-dom.upper[0], dom.upper[0])
                ev_pos = rp_wwb(query, h)
                ev_neg = rp_wwb(query, -h)
                if not ev_pos.valid:
                    continue
                assert ev_neg.valid
                assert_allclose(ev_neg.matrix, ev_pos.matrix, rtol=1e-12)
                count += 1

    def test_out_of_support_invalid(self):
        query = self._queries()[0]
        ev = rp_wwb(query, np.array([1.0, 0.5]))  # |h_u| = width
        assert not ev.valid

    def test_zero_point_invalid(self):
        for query in self._queries():
            assert not rp_wwb(query, np.zeros(2)).valid

    def test_tiny_point_degenerate_denominator(self):
        query = self._queries()[0]
        ev = rp_wwb(query, np.array([1e-300, 0.0]))
        assert not ev.valid

    def test_rank_one_psd(self):
        rng = np.random.default_rng(56)
        query = self._queries()[0]
        for _ in range(20):
            h = np.array([rng.uniform(0.05, 0.9), rng.uniform(0.1, 5.0)])
            ev = rp_wwb(query, h)
            if not ev.valid:
                continue
            assert ev.scalar_q > 0
            eigvals = np.linalg.eigvalsh(ev.matrix)
            assert np.sum(np.abs(eigvals) > 1e-12 * np.abs(eigvals).max()) == 1
            assert np.all(eigvals >= -1e-12)

    def test_batch_matches_scalar_bitwise(self):
        rng = np.random.default_rng(57)
        for query in self._queries():
            points = np.column_stack(
                [rng.uniform(-0.8, 0.8, 50), rng.uniform(0.0, 6.0, 50)]
            )
            q_batch, tr_batch, valid_batch = rp_wwb_batch(query, points)
            for i, h in enumerate(points):
                ev = rp_wwb(query, h)
                assert valid_batch[i] == ev.valid
                if ev.valid:
                    assert q_batch[i] == ev.scalar_q
                    assert tr_batch[i] == ev.weighted_trace

    @pytest.mark.parametrize("prior_idx", [0, 1])
    def test_against_defining_integrals(self, prior_idx):
        query = self._queries()[prior_idx]
        h = np.array([0.31, 1.7])
        ev = rp_wwb(query, h)
        q_oracle = q_from_defining_integrals(
            query.prior, query.sampling.full(), query.snr, h, n_uniform=400_001
        )
        assert abs(ev.scalar_q - q_oracle) / q_oracle < 0.01


class TestKpWwb:
    def test_even_for_centered_array(self):
        d = uniform_linear_array(12, np.pi)
        h = np.linspace(0.05, 0.9, 30)
        assert_allclose(
            kp_wwb(1.0, d, 1.3, 1.0, h), kp_wwb(1.0, d, 1.3, 1.0, -h), rtol=1e-12
        )

    def test_origin_shift_changes_value(self):
        d = uniform_linear_array(12, np.pi)
        v_centered = kp_wwb(1.0, d, 1.0, 1.0, 0.4)
        v_shifted = kp_wwb(1.0, d + np.pi / 2, 1.0, 1.0, 0.4)
        assert v_centered != pytest.approx(v_shifted, rel=1e-6)

    def test_invalid_offsets_nan(self):
        d = uniform_linear_array(4, np.pi)
        assert np.isnan(kp_wwb(1.0, d, 1.0, 1.0, 1.0))
        assert np.isnan(kp_wwb(1.0, d, 1.0, 1.0, 0.0))


class TestUcWwb:
    def test_kappa_value(self):
        # avg_snr 1, N = 12: kappa = 1/13 enters through the lobe weighting
        d = uniform_linear_array(12, np.pi)
        n, avg_snr = 12, 1.0
        kappa = avg_snr**2 / (n * avg_snr + 1.0)
        assert kappa == pytest.approx(1.0 / 13.0)
        # reproduce one value by hand
        h, g, width = 0.7, 0.9, 2.0
        z = np.exp(1j * g * d * h)
        a1 = 1 + kappa / 4 * (n**2 - abs(z.sum()) ** 2)
        a2 = 1 + kappa / 4 * (n**2 - abs((z * z).sum()) ** 2)
        expected = (
            h**2 / (2 * width) * (width - h) ** 2 / a1**2
            / ((width - h) - max(0.0, width - 2 * h) / a2)
        )
        assert uc_wwb(width, d, g, avg_snr, h) == pytest.approx(expected, rel=1e-14)

    def test_symmetric_in_offset(self):
        d = uniform_linear_array(12, np.pi)
        h = np.linspace(0.1, 1.8, 40)
        assert_allclose(
            uc_wwb(2.0, d, 0.8, 1.0, h), uc_wwb(2.0, d, 0.8, 1.0, -h), rtol=1e-13
        )

    def test_invalid_offsets_nan(self):
        d = uniform_linear_array(6, np.pi)
        assert np.isnan(uc_wwb(1.0, d, 1.0, 1.0, 1.5))
        assert np.isnan(uc_wwb(1.0, d, 1.0, 1.0, 0.0))


class TestWwbCost:
    def test_mean_shift_invariance(self):
        sm = ula_sampling(8)
        cfg = AnnealConfig(seed=4)
        costs = []
        for center in (0.0, 2.5, -7.0):
            prior = UniformBoxPrior(center=[center], widths=[1.0])
            query = CostQuery(prior=prior, sampling=sm, snr=1.0)
            costs.append(wwb_cost(query, "rp", cfg)[0])
        assert costs[0] == costs[1] == costs[2]

    def test_weight_scaling_doubles_cost(self):
        sm = ula_sampling(8)
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        cfg = AnnealConfig(seed=4)
        c1, _ = wwb_cost(
            CostQuery(prior=prior, sampling=sm, snr=1.0, weights=[1.0, 0.0]), "rp", cfg
        )
        c2, _ = wwb_cost(
            CostQuery(prior=prior, sampling=sm, snr=1.0, weights=[2.0, 0.0]), "rp", cfg
        )
        assert c2 == pytest.approx(2.0 * c1, rel=1e-12)

    def test_exceeds_grid_oracle(self):
        rng = np.random.default_rng(77)
        for trial in range(50):
            n = int(rng.integers(2, 13))
            width = rng.uniform(0.3, 2.0)
            snr = 10 ** (rng.uniform(-10, 5) / 10)
            sm = ula_sampling(n)
            prior = UniformBoxPrior(center=[0.0], widths=[width])
            query = CostQuery(prior=prior, sampling=sm, snr=snr)

            def objective(points):
                _, traces, valid = rp_wwb_batch(query, points)
                return np.where(valid, traces, -np.inf)

            dom = point_domain(prior)
            _, grid_best, _ = grid_scan(objective, dom.lower, dom.upper, 23)
            cost, h_star = wwb_cost(query, "rp", AnnealConfig(seed=trial))
            assert cost >= grid_best
            assert np.all(h_star >= dom.lower) and np.all(h_star <= dom.upper)

    def test_degenerate_belief_error_translation(self, monkeypatch):
        # The phase dimension keeps some test point valid for any sane
        # prior, so force the optimizer failure path to check the wrapper.
        import wwb_adapt.wwb as wwb_module

        def always_invalid(f, lower, upper, cfg):
            raise ValueError("objective is -inf on the entire seeding grid")

        monkeypatch.setattr(wwb_module, "anneal_maximize", always_invalid)
        sm = ula_sampling(4)
        query = CostQuery(
            prior=UniformBoxPrior(center=[0.0], widths=[1.0]), sampling=sm, snr=1.0
        )
        with pytest.raises(DegenerateBeliefError):
            wwb_cost(query, "rp", AnnealConfig(seed=0))

    def test_unknown_model_rejected(self):
        sm = ula_sampling(4)
        query = CostQuery(
            prior=UniformBoxPrior(center=[0.0], widths=[1.0]), sampling=sm, snr=1.0
        )
        with pytest.raises(ValueError):
            wwb_cost(query, "bzb")


class TestScalingCostCurve:
    def test_argmin_prefers_smallest_on_ties(self):
        d = uniform_linear_array(12, np.pi)
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        g = np.geomspace(0.1, 4.0, 60)
        curve = scaling_cost_curve(prior, d, 1.0, None, g, "uc", AnnealConfig(seed=0))
        tied = curve.costs <= curve.costs.min() * (1 + 1e-9)
        assert curve.argmin_index == np.flatnonzero(tied)[0]

    def test_rejects_bad_grids(self):
        d = uniform_linear_array(4, np.pi)
        prior = UniformBoxPrior(center=[0.0], widths=[1.0])
        with pytest.raises(ValueError):
            scaling_cost_curve(prior, d, 1.0, None, [], "rp")
        with pytest.raises(ValueError):
            scaling_cost_curve(prior, d, 1.0, None, [-1.0, 1.0], "rp")

    def test_costs_positive_and_finite(self):
        d = uniform_linear_array(12, np.pi)
        prior = GaussianPrior(mean=[0.0], variances=[0.1])
        g = np.geomspace(0.2, 5.0, 25)
        curve = scaling_cost_curve(prior, d, 1.0, None, g, "rp", AnnealConfig(seed=1))
        assert np.all(np.isfinite(curve.costs))
        assert np.all(curve.costs > 0)
