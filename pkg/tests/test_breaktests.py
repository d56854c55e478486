"""Wald statistic family: oracles, invariances and scan behaviour."""

import numpy as np
import pytest

from ivxlab.core import BreakWindow, IvxConfig, Sample
from ivxlab.breaktests import (
    compute_statistic,
    joint_wald_alpha_beta,
    joint_wald_beta,
    run_test,
    sup_wald_ivx_alpha,
    sup_wald_ivx_beta,
    sup_wald_ols,
    wald_ivx_alpha,
    wald_ivx_full,
)
from ivxlab.estimators import build_instruments, fit_var1, ivx_fit


def _sample(T=100, p=1, intercept="stable", seed=0, rho_x=0.97, slope=0.3, alpha=0.2, jump=0.0, at=0.5):
    rng = np.random.default_rng(seed)
    x = np.empty((T, p))
    x[0] = 0.0
    for t in range(1, T):
        x[t] = rho_x * x[t - 1] + rng.standard_normal(p)
    beta = np.full(p, slope)
    y = (alpha if intercept != "none" else 0.0) + x @ beta + rng.standard_normal(T)
    if jump:
        k = int(T * at)
        y[k:] += x[k:] @ np.full(p, jump)
    return Sample(y, x, intercept=intercept)


class TestWaldIvxFull:
    def test_zero_target_gives_zero(self):
        s = _sample(60, seed=1)
        z = Sample(np.zeros(60), s.X, intercept="stable")
        assert wald_ivx_full(z) == 0.0

    def test_quadratic_form_oracle_T12(self):
        s = _sample(12, seed=2)
        cfg = IvxConfig(delta_z=0.9, fm_covariance=True)
        w = wald_ivx_full(s, cfg)
        fit = ivx_fit(s, config=cfg)
        expect = float(fit.beta @ np.linalg.solve(np.asarray(fit.cov_beta), fit.beta))
        assert w == pytest.approx(expect, rel=1e-10)

    def test_restriction_validation(self):
        s = _sample(60, 2, seed=3)
        with pytest.raises(ValueError, match="full row rank"):
            wald_ivx_full(s, restriction=[[1.0, 0.0], [2.0, 0.0]])

    def test_single_restriction(self):
        s = _sample(80, 2, seed=4)
        w = wald_ivx_full(s, restriction=[[1.0, 0.0]], r0=[0.0])
        assert w >= 0


class TestSupWaldOls:
    def test_zero_target_scan_is_zero(self):
        s = _sample(80, seed=5, intercept="none")
        z = Sample(np.zeros(80), s.X, intercept="none")
        scan = sup_wald_ols(z)
        assert scan.sup_value == 0.0

    def test_sup_dominance(self):
        scan = sup_wald_ols(_sample(100, seed=6, intercept="none", alpha=0.0))
        assert scan.sup_value >= scan.values.max() - 1e-15
        assert (scan.values >= 0).all()

    def test_break_detected_at_right_place(self):
        s = _sample(200, seed=7, intercept="none", alpha=0.0, jump=3.0, at=0.5)
        scan = sup_wald_ols(s)
        assert abs(scan.argmax_index / 200 - 0.5) < 0.08

    def test_time_reversal_mirrors_argmax(self):
        # noiseless break in the slope: reversing time reverses the location
        rng = np.random.default_rng(8)
        T = 120
        x = rng.standard_normal((T, 1)) + 2.0
        y = x[:, 0] * 1.0
        k = 40
        y[k:] = x[k:, 0] * 3.0
        s = Sample(y, x, intercept="none")
        rev = Sample(y[::-1].copy(), x[::-1].copy(), intercept="none")
        a = sup_wald_ols(s)
        b = sup_wald_ols(rev)
        assert abs((a.argmax_index + b.argmax_index) - T) <= 1

    @pytest.mark.parametrize("intercept", ["none", "stable", "unstable"])
    def test_policies_run(self, intercept):
        scan = sup_wald_ols(_sample(90, seed=9, intercept=intercept))
        assert np.isfinite(scan.sup_value)


class TestSupWaldIvxBeta:
    def test_zero_target(self):
        s = _sample(90, seed=10)
        z = Sample(np.zeros(90), s.X, intercept="stable")
        scan = sup_wald_ivx_beta(z)
        assert scan.sup_value == 0.0

    def test_values_nonnegative_finite(self):
        scan = sup_wald_ivx_beta(_sample(120, 2, seed=11), config=IvxConfig(delta_z=0.75))
        assert np.isfinite(scan.values).all() and (scan.values >= 0).all()

    def test_restart_switch_changes_values(self):
        s = _sample(100, seed=12)
        a = sup_wald_ivx_beta(s, restart=True)
        b = sup_wald_ivx_beta(s, restart=False)
        assert not np.allclose(a.values, b.values)


class TestWaldIvxAlpha:
    def test_mirrored_regimes_give_zero(self):
        rng = np.random.default_rng(13)
        half_x = rng.standard_normal((40, 1))
        half_y = 0.5 + 0.3 * half_x[:, 0] + rng.standard_normal(40)
        s = Sample(np.tile(half_y, 2), np.tile(half_x, (2, 1)), intercept="unstable")
        # with restarted instruments the two regimes see identical data
        assert wald_ivx_alpha(s, 40) == pytest.approx(0.0, abs=1e-18)

    def test_scalar_arithmetic_oracle_T12(self):
        s = _sample(12, seed=14, intercept="unstable")
        cfg = IvxConfig(delta_z=0.9, fm_covariance=False)
        t = 6
        w = wald_ivx_alpha(s, t, cfg)
        # spell the statistic out from sub-sample fits
        rz = cfg.rz(12)
        vh = fit_var1(s.X)[2]
        parts = []
        for rows, voff in ((slice(0, t), 0), (slice(t, 12), t)):
            xs, ys = s.X[rows], s.y[rows]
            zs = build_instruments(xs, cfg, rz=rz).Z
            A = float(zs[:, 0] @ (xs[:, 0] - xs[:, 0].mean()))
            beta = float(zs[:, 0] @ (ys - ys.mean())) / A
            alpha = ys.mean() - beta * zs[:, 0].mean()
            resid = ys - alpha - beta * xs[:, 0]
            n = len(ys)
            sig = float(resid @ resid) / n
            q = sig * float(zs[:, 0] @ zs[:, 0]) / A**2
            om = sig / n + zs[:, 0].mean() ** 2 * q
            parts.append((alpha, om))
        expect = (parts[0][0] - parts[1][0]) ** 2 / (parts[0][1] + parts[1][1])
        assert w == pytest.approx(expect, rel=1e-10)

    def test_policy_none_rejected(self):
        s = _sample(60, seed=15, intercept="none", alpha=0.0)
        with pytest.raises(ValueError, match="intercept"):
            wald_ivx_alpha(s, 30)
        with pytest.raises(ValueError, match="intercept"):
            sup_wald_ivx_alpha(s)

    def test_candidate_bounds_checked(self):
        s = _sample(60, seed=16, intercept="unstable")
        with pytest.raises(ValueError, match="p\\+2"):
            wald_ivx_alpha(s, 1)


class TestJointTests:
    def test_zero_target(self):
        s = _sample(90, seed=17)
        z = Sample(np.zeros(90), s.X, intercept="stable")
        v, scan = joint_wald_beta(z)
        assert v == 0.0 and scan.sup_value == 0.0

    def test_additivity_identity(self):
        s = _sample(110, seed=18)
        cfg = IvxConfig(delta_z=0.75)
        w_full = wald_ivx_full(s, cfg)
        beta_scan = sup_wald_ivx_beta(s, config=cfg)
        v, scan = joint_wald_beta(s, config=cfg)
        assert v == pytest.approx(w_full + beta_scan.sup_value, rel=1e-12)
        np.testing.assert_allclose(scan.values, w_full + beta_scan.values, rtol=1e-12)

    def test_alpha_beta_constant_term_identity(self):
        s = _sample(110, seed=19, intercept="unstable")
        cfg = IvxConfig(delta_z=0.75)
        w_full = wald_ivx_full(s, cfg)
        v, scan = joint_wald_alpha_beta(s, config=cfg)
        bscan = sup_wald_ivx_beta(s, config=cfg)
        ascan = sup_wald_ivx_alpha(s, config=cfg)
        # the full-sample term is constant over candidates
        assert v == pytest.approx(w_full + (bscan.values + ascan.values).max(), rel=1e-12)

    def test_alpha_beta_needs_intercept(self):
        s = _sample(80, seed=20, intercept="none", alpha=0.0)
        with pytest.raises(ValueError):
            joint_wald_alpha_beta(s)


class TestInvariances:
    @pytest.mark.parametrize("statistic", ["ivx", "sup-ols", "sup-ivx-beta", "sup-ivx-alpha", "joint-beta", "joint-alpha-beta"])
    def test_scale_invariance(self, statistic):
        intercept = "unstable" if "alpha" in statistic else "stable"
        s = _sample(100, seed=21, intercept=intercept)
        lam = 4.2
        scaled = Sample(lam * s.y, s.X, intercept=intercept)
        cfg = IvxConfig(delta_z=0.75)
        v1, _ = compute_statistic(s, statistic, None, cfg)
        v2, _ = compute_statistic(scaled, statistic, None, cfg)
        assert v2 == pytest.approx(v1, rel=1e-8)

    def test_break_localization_mass(self):
        """A mid-sample slope break of ten times the break estimator's own
        standard error is located within +-0.05 of 0.5 in at least 95% of
        replications (stationary regressor design)."""
        from ivxlab.core import InnovationCov, PersistenceSpec
        from ivxlab.dgp import DgpParams, derive_seed, simulate_sample
        from ivxlab.estimators import ols_fit

        hits = 0
        reps = 1000
        for r in range(reps):
            par = DgpParams(
                theta1=(0.0, [0.25]),
                persistence=PersistenceSpec([0.5], 0.0),
                innovations=InnovationCov.from_correlation(0.0),
                intercept="none",
            )
            base = simulate_sample(par, 500, derive_seed(31, r))
            v1 = np.asarray(ols_fit(base, rows=slice(0, 250)).cov_beta)[0, 0]
            v2 = np.asarray(ols_fit(base, rows=slice(250, 500)).cov_beta)[0, 0]
            se = np.sqrt(v1 + v2)
            y = base.y.copy()
            y[250:] += 10.0 * se * base.X[250:, 0]
            scan = sup_wald_ols(Sample(y, base.X, intercept="none"))
            hits += abs(scan.argmax_index / 500 - 0.5) <= 0.05
        assert hits / reps >= 0.95


class TestRunTest:
    def test_report_fields(self):
        s = _sample(100, seed=22, jump=2.0, intercept="none", alpha=0.0)
        rep = run_test(s, "sup-ols", critical_value=8.85, alpha=0.05)
        assert rep.reject == (rep.value > 8.85)
        assert 0.15 <= rep.break_fraction <= 0.85

    def test_unknown_statistic(self):
        s = _sample(60, seed=23)
        with pytest.raises(ValueError, match="unknown statistic"):
            compute_statistic(s, "sup-banana")
