"""OLS and instrumented (IVX) estimation with optional bias correction.

Instruments are built by filtering the first differences of the regressors
through a mildly persistent root, which keeps the estimator's limit pivotal
whatever the persistence of the regressors themselves.  Sub-sample fits (the
building block of every break scan) accept an explicit row range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .core import FitResult, IvxConfig, Sample
from .longrun import LongRunEstimates, bartlett_lrcov, long_run_estimates

PINV_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class InstrumentSet:
    """Filtered instruments aligned with the sample rows.

    ``Z`` has the shape of ``Sample.X``; row t holds the instrument paired
    with the time-t observation (the value accumulated through t-1), with a
    zero starting row.  The scalar root ``rz`` equals 1 - c_z / T**delta_z.
    """

    Z: np.ndarray
    c_z: float
    delta_z: float
    rz: float

    def __post_init__(self):
        Z = np.atleast_2d(np.asarray(self.Z, dtype=float).T).T
        Z.flags.writeable = False
        object.__setattr__(self, "Z", Z)


def build_instruments(X: np.ndarray, config: IvxConfig, rz: float = None) -> InstrumentSet:
    """Run the instrument recursion over the stored regressor rows.

    Row 0 of the output is zero; row t is rz * row_{t-1} + (X[t] - X[t-1]),
    so the filtration starts at the sample origin.  ``rz`` may be pinned
    explicitly (sub-sample scans keep the full-sample root).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    T = X.shape[0]
    if rz is None:
        rz = config.rz(T)
    Z = np.zeros_like(X)
    dX = np.diff(X, axis=0)
    for i in range(X.shape[1]):
        # same one-multiply-one-add recursion as the definition, run in C
        Z[1:, i] = lfilter([1.0], [1.0, -rz], dX[:, i])
    return InstrumentSet(Z, config.c_z, config.delta_z, rz)


def fit_var1(X: np.ndarray, rows: slice = None):
    """First-order autoregression of the stored regressor rows, with intercept.

    Returns (mu, R, vhat) where vhat[s] is the innovation implied by rows
    (s-1, s); vhat has one row fewer than the input window.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    if rows is not None:
        X = X[rows]
    lag, cur = X[:-1], X[1:]
    mlag, mcur = lag.mean(axis=0), cur.mean(axis=0)
    dl, dc = lag - mlag, cur - mcur
    S = dl.T @ dl
    try:
        Rt = np.linalg.solve(S, dl.T @ dc)
    except np.linalg.LinAlgError:
        Rt = np.linalg.pinv(S, rcond=PINV_RTOL) @ (dl.T @ dc)
    R = Rt.T
    mu = mcur - R @ mlag
    vhat = cur - mu - lag @ R.T
    return mu, R, vhat


def _solve_or_pinv(A: np.ndarray, b: np.ndarray):
    """Solve A x = b, falling back to a thresholded pseudo-inverse."""
    try:
        x = np.linalg.solve(A, b)
        if np.isfinite(x).all():
            return x, False
    except np.linalg.LinAlgError:
        pass
    return np.linalg.pinv(A, rcond=PINV_RTOL) @ b, True


def _inv_or_pinv(A: np.ndarray):
    try:
        Ai = np.linalg.inv(A)
        if np.isfinite(Ai).all():
            return Ai, False
    except np.linalg.LinAlgError:
        pass
    return np.linalg.pinv(A, rcond=PINV_RTOL), True


def ols_fit(sample: Sample, rows: slice = None) -> FitResult:
    """Least squares on a row range, honouring the sample's intercept policy.

    The slope covariance is the sigma^2-scaled (X'X)^{-1} block; rank
    deficient designs fall back to a pseudo-inverse and are flagged.
    """
    rows = rows if rows is not None else slice(None)
    y, X = sample.y[rows], sample.X[rows]
    n, p = X.shape
    if n < p + 2:
        raise ValueError(f"fit range too short: {n} rows for {p} regressors")
    if sample.intercept == "none":
        W = X
    else:
        W = np.column_stack([np.ones(n), X])
    G = W.T @ W
    theta, flagged = _solve_or_pinv(G, W.T @ y)
    resid = y - W @ theta
    sigma2 = float(resid @ resid) / n
    Gi, f2 = _inv_or_pinv(G)
    cov = sigma2 * Gi
    if sample.intercept == "none":
        alpha, beta, cov_beta = None, theta, cov
    else:
        alpha, beta, cov_beta = float(theta[0]), theta[1:], cov[1:, 1:]
    return FitResult(beta, alpha, resid, cov_beta, "OLS", rank_deficient=flagged or f2)


def ivz_intercept(sample: Sample, beta: np.ndarray, instruments: InstrumentSet, rows: slice = None) -> float:
    """Intercept recovered through the instrument mean: ybar - beta' zbar."""
    rows = rows if rows is not None else slice(None)
    ybar = sample.y[rows].mean()
    zbar = instruments.Z[rows].mean(axis=0)
    return float(ybar - np.asarray(beta) @ zbar)


def _ivx_pieces(y, X, Z, demean, config: IvxConfig, vhat=None):
    """Core sub-sample moments shared by ivx_fit and the scan reference path.

    ``y``, ``X``, ``Z`` are the rows of one estimation window (instruments
    already restarted by the caller if required); ``vhat`` carries the
    autoregression innovations aligned so vhat[s-1] pairs with row s of the
    window.  Returns a dict of everything the Wald statistics consume.
    """
    n, p = X.shape
    if demean:
        xbar, ybar = X.mean(axis=0), y.mean()
        Xc, yc = X - xbar, y - ybar
    else:
        Xc, yc = X, y
    zbar = Z.mean(axis=0)
    A = Z.T @ Xc  # sum z (x - xbar)'
    b = Z.T @ yc
    Szz = Z.T @ Z
    beta, flagged = _solve_or_pinv(A, b)
    m = config.bandwidth(n)

    if vhat is None:
        vhat = fit_var1(X)[2]

    corrected = False
    if config.bias_correct:
        alpha0 = float(y.mean() - beta @ zbar) if demean else 0.0
        resid0 = y - alpha0 - X @ beta
        k = min(n - 1, len(vhat))
        if k > m:
            # bartlett_lrcov normalizes by its own length, so k * delta is
            # the raw weighted sum entering the corrected numerator
            delta = bartlett_lrcov(resid0[:k], vhat[:k], m, two_sided=False).ravel()
            beta, f2 = _solve_or_pinv(A, b - k * delta)
            flagged = flagged or f2
            corrected = True

    alpha = float(y.mean() - beta @ zbar) if demean else None
    resid = y - (alpha or 0.0) - X @ beta
    sigma2 = float(resid @ resid) / n
    k = min(n - 1, len(vhat))
    lr = long_run_estimates(resid[:k], vhat[:k], m) if k > 0 else None

    Ai, f3 = _inv_or_pinv(A)
    flagged = flagged or f3
    sandwich = Ai @ Szz @ Ai.T  # (Z'X)^{-1} (Z'Z) (X'Z)^{-1}, unscaled
    if config.fm_covariance and demean and lr is not None:
        M = sigma2 * Szz - lr.omega_fm * n * np.outer(zbar, zbar)
        Q = Ai @ M @ Ai.T
    else:
        Q = sigma2 * sandwich
    return {
        "beta": beta,
        "alpha": alpha,
        "resid": resid,
        "sigma2": sigma2,
        "A": A,
        "Szz": Szz,
        "zbar": zbar,
        "sandwich": sandwich,
        "Q": Q,
        "lr": lr,
        "n": n,
        "flagged": flagged,
        "corrected": corrected,
    }


def ivx_fit(
    sample: Sample,
    instruments: InstrumentSet = None,
    rows: slice = None,
    config: IvxConfig = None,
    lr: LongRunEstimates = None,
    vhat: np.ndarray = None,
) -> FitResult:
    """Instrumented fit over a row range.

    Demeaning (the intercept policy is 'stable' or 'unstable') uses the
    sub-sample means; the covariance is the fully modified form or the plain
    sigma^2-scaled sandwich depending on ``config.fm_covariance``; with
    ``config.bias_correct`` the numerator gets the kernel-weighted
    endogeneity correction before the final solve.
    """
    config = config or IvxConfig()
    if instruments is None:
        instruments = build_instruments(sample.X, config)
    rows = rows if rows is not None else slice(None)
    y, X, Z = sample.y[rows], sample.X[rows], instruments.Z[rows]
    if X.shape[0] < X.shape[1] + 2:
        raise ValueError(f"fit range too short: {X.shape[0]} rows for {X.shape[1]} regressors")
    demean = sample.intercept != "none"
    pieces = _ivx_pieces(y, X, Z, demean, config, vhat=vhat)
    if lr is not None and config.fm_covariance and demean:
        Ai, _ = _inv_or_pinv(pieces["A"])
        M = pieces["sigma2"] * pieces["Szz"] - lr.omega_fm * pieces["n"] * np.outer(pieces["zbar"], pieces["zbar"])
        Q = Ai @ M @ Ai.T
    else:
        Q = pieces["Q"]
    method = "IVX-BC" if pieces["corrected"] else "IVX"
    return FitResult(pieces["beta"], pieces["alpha"], pieces["resid"], (Q + Q.T) / 2.0, method, pieces["flagged"])
