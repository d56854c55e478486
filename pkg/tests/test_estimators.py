"""Estimator oracles: double-sum instruments, normal equations, ratio fits."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivxlab.core import IvxConfig, Sample
from ivxlab.estimators import build_instruments, fit_var1, ivx_fit, ivz_intercept, ols_fit
from ivxlab.longrun import bartlett_lrcov


def _sample(T=40, p=1, intercept="stable", seed=0, slope=0.4, alpha=0.2, rho_x=0.95):
    rng = np.random.default_rng(seed)
    x = np.empty((T, p))
    x[0] = 0.0
    for t in range(1, T):
        x[t] = rho_x * x[t - 1] + rng.standard_normal(p)
    y = (alpha if intercept != "none" else 0.0) + x @ np.full(p, slope) + rng.standard_normal(T)
    return Sample(y, x, intercept=intercept)


class TestInstruments:
    def test_unit_root_escape_hatch_recovers_regressor(self):
        # rz pinned to 1 telescopes the filtered differences back to x itself
        s = _sample(30, 2, seed=1)
        X = s.X - s.X[0]
        Z = build_instruments(X, IvxConfig(), rz=1.0).Z
        np.testing.assert_allclose(Z, X, atol=1e-12)

    def test_single_step(self):
        X = np.array([[1.0], [3.5]])
        Z = build_instruments(X, IvxConfig()).Z
        assert Z[0, 0] == 0.0
        assert Z[1, 0] == pytest.approx(2.5)

    def test_double_sum_oracle(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((5, 2))
        cfg = IvxConfig(c_z=1.0, delta_z=0.5)
        inst = build_instruments(X, cfg)
        rz = cfg.rz(5)
        dX = np.diff(X, axis=0)
        for t in range(5):
            expect = np.zeros(2)
            for j in range(1, t + 1):
                expect += rz ** (t - j) * dX[j - 1]
            np.testing.assert_allclose(inst.Z[t], expect, atol=1e-12)

    @settings(max_examples=25)
    @given(st.integers(0, 2**31 - 1), st.floats(0.3, 0.99))
    def test_recursion_invariant(self, seed, delta):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((20, 1))
        cfg = IvxConfig(delta_z=delta)
        inst = build_instruments(X, cfg)
        resid = inst.Z[1:] - (inst.rz * inst.Z[:-1] + np.diff(X, axis=0))
        assert np.abs(resid).max() < 1e-12


class TestOlsFit:
    def test_zero_target(self):
        s = _sample(30, seed=2)
        z = Sample(np.zeros(30), s.X, intercept="none")
        fit = ols_fit(z)
        assert np.abs(fit.beta).max() == 0.0
        assert np.abs(fit.residuals).max() == 0.0

    def test_noiseless_recovery(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((30, 1))
        s = Sample(2.0 * x[:, 0], x, intercept="none")
        fit = ols_fit(s)
        assert fit.beta[0] == pytest.approx(2.0, abs=1e-10)

    def test_normal_equations_oracle_T10(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(10)
        y = 0.3 + 1.2 * x + rng.standard_normal(10)
        s = Sample(y, x[:, None], intercept="stable")
        fit = ols_fit(s)
        # explicit 2x2 inversion of the normal equations
        W = np.column_stack([np.ones(10), x])
        G = W.T @ W
        det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
        Gi = np.array([[G[1, 1], -G[0, 1]], [-G[1, 0], G[0, 0]]]) / det
        theta = Gi @ (W.T @ y)
        assert fit.alpha == pytest.approx(theta[0], rel=1e-10)
        assert fit.beta[0] == pytest.approx(theta[1], rel=1e-10)

    def test_residual_orthogonality(self):
        s = _sample(60, 2, seed=8)
        fit = ols_fit(s)
        W = np.column_stack([np.ones(60), s.X])
        rel = np.abs(W.T @ np.asarray(fit.residuals)) / (np.abs(W).sum(axis=0) * np.abs(fit.residuals).max())
        assert rel.max() < 1e-9

    def test_rank_deficient_flagged(self):
        x = np.ones((20, 2))  # duplicated constant columns
        y = np.arange(20.0)
        fit = ols_fit(Sample(y, x, intercept="none"))
        assert fit.rank_deficient

    def test_subrange(self):
        s = _sample(50, seed=9)
        full = ols_fit(s)
        head = ols_fit(s, rows=slice(0, 25))
        assert len(head.residuals) == 25
        assert head.beta[0] != pytest.approx(full.beta[0])


class TestIvxFit:
    def test_collapses_to_ols_when_instrument_is_regressor(self):
        s = _sample(40, seed=10, rho_x=0.9)
        X0 = s.X - s.X[0]
        s0 = Sample(s.y, X0, intercept="stable")
        inst = build_instruments(X0, IvxConfig(), rz=1.0)
        fit = ivx_fit(s0, inst, config=IvxConfig())
        ols = ols_fit(s0)
        assert fit.beta[0] == pytest.approx(ols.beta[0], abs=1e-12)

    def test_zero_target(self):
        s = _sample(30, seed=11)
        z = Sample(np.zeros(30), s.X, intercept="stable")
        fit = ivx_fit(z)
        assert np.abs(fit.beta).max() < 1e-14

    def test_ratio_of_sums_oracle_T12(self):
        s = _sample(12, seed=12)
        cfg = IvxConfig(delta_z=0.9)
        inst = build_instruments(s.X, cfg)
        fit = ivx_fit(s, inst, config=cfg)
        z = inst.Z[:, 0]
        num = float(z @ (s.y - s.y.mean()))
        den = float(z @ (s.X[:, 0] - s.X[:, 0].mean()))
        assert fit.beta[0] == pytest.approx(num / den, rel=1e-12)

    def test_demeaning_invariance(self):
        s = _sample(40, seed=13)
        shifted = Sample(s.y + 7.3, s.X, intercept="stable")
        a = ivx_fit(s)
        b = ivx_fit(shifted)
        assert a.beta[0] == pytest.approx(b.beta[0], abs=1e-12)
        assert b.alpha - a.alpha == pytest.approx(7.3, abs=1e-10)

    def test_scale_equivariance(self):
        s = _sample(40, seed=14)
        lam = 3.5
        scaled = Sample(lam * s.y, s.X, intercept="stable")
        a = ivx_fit(s)
        b = ivx_fit(scaled)
        assert b.beta[0] == pytest.approx(lam * a.beta[0], rel=1e-12)

    def test_bias_correction_equation(self):
        s = _sample(60, seed=15, rho_x=0.98)
        cfg = IvxConfig(bias_correct=True)
        inst = build_instruments(s.X, cfg)
        fit = ivx_fit(s, inst, config=cfg)
        assert fit.method == "IVX-BC"
        # replicate the corrected numerator by hand
        plain = ivx_fit(s, inst, config=IvxConfig(bias_correct=False))
        z, x, y = inst.Z[:, 0], s.X[:, 0], s.y
        A = float(z @ (x - x.mean()))
        b = float(z @ (y - y.mean()))
        vhat = fit_var1(s.X)[2][:, 0]
        resid0 = y - (y.mean() - plain.beta[0] * z.mean()) - x * plain.beta[0]
        k = 59
        m = cfg.bandwidth(60)
        delta = k * bartlett_lrcov(resid0[:k], vhat[:k], m)[0, 0]
        assert fit.beta[0] == pytest.approx((b - delta) / A, rel=1e-10)

    def test_no_demeaning_without_intercept(self):
        s = _sample(40, seed=16, intercept="none", alpha=0.0)
        inst = build_instruments(s.X, IvxConfig())
        fit = ivx_fit(s, inst)
        z, x, y = inst.Z[:, 0], s.X[:, 0], s.y
        assert fit.alpha is None
        assert fit.beta[0] == pytest.approx(float(z @ y) / float(z @ x), rel=1e-12)

    def test_covariance_symmetric_psd(self):
        s = _sample(80, 2, seed=17)
        fit = ivx_fit(s)
        C = np.asarray(fit.cov_beta)
        np.testing.assert_allclose(C, C.T, atol=1e-12)
        assert np.linalg.eigvalsh(C)[0] > -1e-12


class TestIvzIntercept:
    def test_zero_slope_gives_mean(self):
        s = _sample(30, seed=18)
        inst = build_instruments(s.X, IvxConfig())
        assert ivz_intercept(s, [0.0], inst) == pytest.approx(s.y.mean())

    def test_location_equivariance(self):
        s = _sample(30, seed=19)
        inst = build_instruments(s.X, IvxConfig())
        beta = [0.7]
        a = ivz_intercept(s, beta, inst)
        shifted = Sample(s.y + 2.5, s.X, intercept="stable")
        b = ivz_intercept(shifted, beta, inst)
        assert b - a == pytest.approx(2.5, abs=1e-12)

    def test_mean_arithmetic_oracle_T10(self):
        s = _sample(10, seed=20)
        inst = build_instruments(s.X, IvxConfig())
        beta = np.array([0.3])
        expect = s.y.mean() - 0.3 * inst.Z[:, 0].mean()
        assert ivz_intercept(s, beta, inst) == pytest.approx(expect, rel=1e-12)


class TestVar1:
    def test_recovers_exact_ar(self):
        rng = np.random.default_rng(21)
        T = 300
        x = np.empty((T, 1))
        x[0] = 0.0
        for t in range(1, T):
            x[t] = 0.2 + 0.7 * x[t - 1] + rng.standard_normal(1)
        mu, R, vhat = fit_var1(x)
        assert R[0, 0] == pytest.approx(0.7, abs=0.1)
        recon = x[1:] - mu - x[:-1] @ R.T
        np.testing.assert_allclose(recon, vhat, atol=1e-12)
