"""Wild residual bootstrap critical values for the break and joint tests.

The resampling scheme fits the predictive equation and a first-order
autoregression of the regressors, multiplies the joint residual rows by a
common scalar multiplier, regenerates the regressors through the
bias-corrected autoregression matrix and regenerates the response under the
null-imposed coefficients.  The statistic recomputed on each draw is the
caller's chosen break or joint statistic; the empirical upper quantile of
the draws is the critical value.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .breaktests import compute_statistic
from .core import BreakWindow, CriticalValueTable, IvxConfig, Sample
from .estimators import fit_var1, ols_fit

EIGENVALUE_GUARD = 1.0 - 1e-6

# statistics whose null imposes no predictability (slopes zero); the break
# statistics impose only the stable full-sample fit
_PREDICTABILITY_NULL = {"ivx", "joint-beta", "joint-alpha-beta"}


def bias_corrected_autoregression(sample: Sample):
    """Bias-corrected first-order autoregression matrix of the regressors.

    Applies the eigenvalue-expanded correction to the least-squares matrix;
    if any eigenvalue is too close to the unit circle the correction is
    skipped (its inverses blow up) and the uncorrected matrix is returned
    with a flag.

    Returns (R_bc, mu, vhat, skipped).
    """
    mu, R, vhat = fit_var1(sample.X)
    lam = np.linalg.eigvals(R.T)
    if np.max(np.abs(lam)) >= EIGENVALUE_GUARD:
        return R, mu, vhat, True
    p = sample.p
    lag = sample.X[:-1]
    xt = lag - lag.mean(axis=0)
    sxx = xt.T @ xt
    n_pairs = vhat.shape[0]
    sigma_xx = vhat.T @ vhat / n_pairs
    eye = np.eye(p)
    term = np.linalg.inv(eye - R.T) + R.T @ np.linalg.inv(eye - R.T @ R.T)
    for lj in lam:
        term = term + lj * np.linalg.inv(eye - lj * R.T)
    correction = sigma_xx @ term @ np.linalg.inv(sxx)
    R_bc = R + np.real(correction)
    return R_bc, mu, vhat, False


def _null_fit(sample: Sample, statistic: str):
    """Full-sample coefficients imposing the relevant null hypothesis."""
    if statistic in _PREDICTABILITY_NULL:
        beta = np.zeros(sample.p)
        alpha = float(sample.y.mean()) if sample.intercept != "none" else 0.0
        resid = sample.y - alpha
        return alpha, beta, resid
    fit = ols_fit(sample)
    alpha = fit.alpha if fit.alpha is not None else 0.0
    return alpha, fit.beta, np.asarray(fit.residuals)


def wild_bootstrap_critical_value(
    sample: Sample,
    statistic: str,
    config: IvxConfig = None,
    window: BreakWindow = None,
    bootstrap_reps: int = 399,
    alphas=(0.05,),
    seed=0,
    multiplier: str = "normal",
    bias_correct_ar: bool = True,
) -> CriticalValueTable:
    """Empirical critical value(s) of one statistic under the wild bootstrap.

    Each draw multiplies the fitted residual rows (response and regressor
    innovations jointly) by one scalar multiplier per period, regenerates
    the regressors from the bias-corrected autoregression started at the
    observed initial row, regenerates the response under the null fit, and
    recomputes the statistic.  Deterministic in (sample, reps, seed); draws
    on which the statistic fails are discarded and counted, more than 5%
    discards is an error.
    """
    if bootstrap_reps < 99:
        raise ValueError("need at least 99 bootstrap draws")
    if multiplier not in ("normal", "rademacher", "unit"):
        raise ValueError(f"unknown multiplier {multiplier!r}")
    config = config or IvxConfig()
    window = window or BreakWindow()
    T, p = sample.T, sample.p

    alpha0, beta0, uy = _null_fit(sample, statistic)
    if bias_correct_ar:
        R_use, mu_x, vhat, _skipped = bias_corrected_autoregression(sample)
    else:
        mu_x, R_use, vhat = fit_var1(sample.X)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    scalar_ar = p == 1
    stats = []
    discarded = 0
    for _ in range(bootstrap_reps):
        if multiplier == "normal":
            e = rng.standard_normal(T)
        elif multiplier == "rademacher":
            e = rng.integers(0, 2, size=T) * 2.0 - 1.0
        else:  # "unit": diagnostic mode, no resampling noise
            e = np.ones(T)
        uy_star = uy * e
        # the period-t multiplier scales the whole residual row (u_t, v_t');
        # the first stored regressor row has no fitted innovation and is
        # kept at its observed value
        ux_star = vhat * e[: T - 1, None]
        x_star = np.empty_like(sample.X)
        x_star[0] = sample.X[0]
        if scalar_ar:
            r = float(R_use[0, 0])
            drive = mu_x[0] + ux_star[:, 0]
            x_star[1:, 0] = lfilter([1.0], [1.0, -r], drive, zi=[r * x_star[0, 0]])[0]
        else:
            for t in range(1, T):
                x_star[t] = mu_x + R_use @ x_star[t - 1] + ux_star[t - 1]
        y_star = alpha0 + x_star @ beta0 + uy_star
        try:
            boot_sample = Sample(y_star, x_star, intercept=sample.intercept)
            value, _ = compute_statistic(boot_sample, statistic, window, config)
            if not np.isfinite(value):
                raise FloatingPointError
            stats.append(value)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            discarded += 1
    if discarded > 0.05 * bootstrap_reps:
        raise RuntimeError(f"{discarded} of {bootstrap_reps} bootstrap draws failed")

    stats = np.sort(np.asarray(stats))
    B = len(stats)
    quantiles = []
    for a in sorted(alphas):
        # classic order-statistic choice: ceil((1-a)(B+1)), clipped to B
        r = min(int(np.ceil((1.0 - a) * (B + 1))), B)
        quantiles.append((a, float(stats[r - 1])))
    return CriticalValueTable(
        statistic=statistic,
        p=p,
        window=(window.pi1, window.pi2),
        quantiles=tuple(quantiles),
        replications=B,
        seed=seed if isinstance(seed, int) else 0,
        method="bootstrap",
    )
