"""Simulation oracles: innovation moments, recursion unrolling, seed rules."""

import numpy as np
import pytest

from ivxlab.core import InnovationCov, PersistenceSpec
from ivxlab.dgp import DgpParams, derive_seed, draw_innovations, simulate_lur, simulate_sample


class TestDrawInnovations:
    def test_identity_covariance_moments(self):
        cov = InnovationCov(1.0, [0.0], [[1.0]])
        e = draw_innovations(3, cov, 123)
        assert e.shape == (3, 2)
        big = draw_innovations(1_000_000, cov, 123)
        emp = big.T @ big / len(big)
        assert np.abs(emp - np.eye(2)).max() < 0.01

    def test_correlated_draws_match_target(self):
        cov = InnovationCov.from_correlation(0.9)
        e = draw_innovations(1_000_000, cov, 7)
        corr = np.corrcoef(e[:, 0], e[:, 1])[0, 1]
        assert abs(corr - 0.9) < 0.005

    def test_degenerate_covariance_rejected(self):
        with pytest.raises(ValueError, match="eigenvalue"):
            InnovationCov.from_correlation(1.0)

    def test_deterministic_in_seed(self):
        cov = InnovationCov.from_correlation(0.3)
        a = draw_innovations(50, cov, 99)
        b = draw_innovations(50, cov, 99)
        np.testing.assert_array_equal(a, b)


class TestSimulateLur:
    def test_c_zero_is_cumulative_sum(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((25, 1))
        x = simulate_lur(25, PersistenceSpec([0.0], 1.0), v)
        np.testing.assert_allclose(x[1:, 0], np.cumsum(v[:, 0]), rtol=0, atol=1e-12)
        assert x[0, 0] == 0.0

    def test_zero_root_recursion(self):
        # c = T makes the autoregressive root exactly zero
        v = np.array([[1.0], [1.0], [1.0]])
        x = simulate_lur(3, PersistenceSpec([3.0], 1.0), v)
        np.testing.assert_array_equal(x[:, 0], [0.0, 1.0, 1.0, 1.0])

    def test_hand_unrolled_recursion(self):
        # T=4, c=5, gamma=1: root = 1 - 5/4 = -0.25
        v = np.array([[1.0], [0.0], [0.0], [1.0]])
        rho = 1 - 5 / 4
        expect = [0.0]
        for t in range(4):
            expect.append(rho * expect[-1] + v[t, 0])
        x = simulate_lur(4, PersistenceSpec([5.0], 1.0), v)
        np.testing.assert_allclose(x[:, 0], expect, rtol=0, atol=1e-15)

    def test_initial_condition(self):
        v = np.zeros((5, 2))
        x0 = np.array([2.0, -1.0])
        spec = PersistenceSpec([1.0, 1.0], 1.0)
        x = simulate_lur(5, spec, v, x0)
        np.testing.assert_array_equal(x[0], x0)
        np.testing.assert_allclose(x[1], spec.rho(5) * x0, atol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="innovation matrix"):
            simulate_lur(5, PersistenceSpec([1.0], 1.0), np.zeros((4, 1)))


def _params(rho=0.0, c=1.0, theta1=(0.0, [0.25]), theta2=None, frac=None, intercept="none", gamma=1.0):
    return DgpParams(
        theta1=theta1,
        theta2=theta2,
        break_fraction=frac,
        persistence=PersistenceSpec([c], gamma),
        innovations=InnovationCov.from_correlation(rho),
        intercept=intercept,
    )


class TestSimulateSample:
    def test_null_break_equals_no_break(self):
        a = simulate_sample(_params(frac=0.5, theta2=(0.0, [0.25])), 60, 5)
        b = simulate_sample(_params(), 60, 5)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.X, b.X)

    def test_pure_noise_reduces_to_u(self):
        par = _params(rho=0.0, theta1=(0.0, [0.0]))
        s = simulate_sample(par, 80, 11)
        u = draw_innovations(80, par.innovations, 11)[:, 0]
        np.testing.assert_array_equal(s.y, u)

    def test_seed_determinism_bitwise(self):
        a = simulate_sample(_params(rho=0.5), 100, 13)
        b = simulate_sample(_params(rho=0.5), 100, 13)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.X, b.X)

    def test_structural_identities_of_published_design(self):
        # y_t = 0.25 x_{t-1} + u_t with x following the near-unit-root
        # recursion driven by the same joint innovation draw
        par = _params(rho=0.5, c=1.0)
        T = 200
        s = simulate_sample(par, T, 21)
        e = draw_innovations(T, par.innovations, 21)
        np.testing.assert_allclose(s.y, 0.25 * s.X[:, 0] + e[:, 0], atol=1e-12)
        rho_T = 1 - 1.0 / T
        x_full = np.concatenate([s.X[:, 0], [rho_T * s.X[-1, 0] + e[-1, 1]]])
        np.testing.assert_allclose(x_full[1:], rho_T * x_full[:-1] + e[:, 1], atol=1e-12)

    def test_break_applies_theta2_after_k(self):
        par = _params(theta1=(0.0, [0.0]), theta2=(5.0, [0.0]), frac=0.5, intercept="unstable")
        s = simulate_sample(par, 50, 3)
        u = draw_innovations(50, par.innovations, 3)[:, 0]
        np.testing.assert_array_equal(s.y[:25], u[:25])
        np.testing.assert_array_equal(s.y[25:], 5.0 + u[25:])


class TestScalingProperty:
    """Sample second moments grow at the rate their persistence class implies."""

    @staticmethod
    def _mean_ssq(c, gamma, T, reps=200):
        spec = PersistenceSpec([c], gamma)
        tot = 0.0
        for r in range(reps):
            rng = np.random.default_rng(derive_seed(3, c, T, gamma, r))
            v = rng.standard_normal((T, 1))
            x = simulate_lur(T, spec, v)
            tot += float((x[:T, 0] ** 2).sum())
        return tot / reps

    def test_unit_root_exponent_two(self):
        Ts = np.array([200, 400, 800, 1600])
        m = [self._mean_ssq(0.0, 1.0, T) for T in Ts]
        slope = np.polyfit(np.log(Ts), np.log(m), 1)[0]
        assert abs(slope - 2.0) < 0.15

    def test_stationary_exponent_one(self):
        Ts = np.array([200, 400, 800, 1600])
        m = [self._mean_ssq(0.5, 0.0, T) for T in Ts]
        slope = np.polyfit(np.log(Ts), np.log(m), 1)[0]
        assert abs(slope - 1.0) < 0.15

    def test_normalized_spread_nondegenerate_for_unit_root(self):
        vals = []
        for r in range(300):
            rng = np.random.default_rng(derive_seed(9, r))
            x = simulate_lur(400, PersistenceSpec([0.0], 1.0), rng.standard_normal((400, 1)))
            vals.append(float((x[:400, 0] ** 2).sum()) / 400**2)
        vals = np.asarray(vals)
        assert vals.std() > 0.3 * vals.mean()  # order-one dispersion


class TestDeriveSeed:
    def test_distinct_cells_distinct_streams(self):
        a = np.random.default_rng(derive_seed(1, 1.0, 100, 0.9, 0)).standard_normal(4)
        b = np.random.default_rng(derive_seed(1, 1.0, 100, 0.9, 1)).standard_normal(4)
        c = np.random.default_rng(derive_seed(1, 20.0, 100, 0.9, 0)).standard_normal(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_float_keys_hash_stably(self):
        s1 = derive_seed(7, -0.9, 100)
        s2 = derive_seed(7, -0.9, 100)
        assert s1.entropy == s2.entropy
