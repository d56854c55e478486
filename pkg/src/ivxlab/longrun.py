"""Bartlett-kernel long-run covariances and the fully modified correction.

The one-sided Bartlett sum is the building block of the bias correction of
the instrumented estimator; the symmetrized two-sided variant feeds the fully
modified covariance entering every instrumented Wald statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PINV_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class LongRunEstimates:
    """Long-run second moments of the system residuals (u_t, v_t)."""

    sigma_uu: float
    omega_uv: np.ndarray  # (p,)
    omega_vv: np.ndarray  # (p, p)
    omega_fm: float
    rho2_uv: float
    singular_vv: bool = False

    def __post_init__(self):
        if self.sigma_uu < 0:
            raise ValueError("sigma_uu must be nonnegative")
        if not 0 <= self.rho2_uv <= 1:
            raise ValueError("rho2_uv must lie in [0, 1]")


def bartlett_lrcov(a: np.ndarray, b: np.ndarray, m: int, two_sided: bool = False) -> np.ndarray:
    """Bartlett-weighted covariance (1/T) sum_h w_h sum_t a_t b'_{t-h}.

    Weights are w_h = 1 - h/(m+1) for h = 0..m.  With ``two_sided`` the
    transposed lags h = 1..m are added (the long-run Omega form); the
    one-sided default is the Delta form used for bias correction.

    Parameters
    ----------
    a, b : (T,) or (T, q)/(T, r) arrays of residuals.
    m : lag truncation, 0 <= m < T.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float).T).T
    b = np.atleast_2d(np.asarray(b, dtype=float).T).T
    T = a.shape[0]
    if b.shape[0] != T:
        raise ValueError("residual series must have equal length")
    if m < 0 or m >= T:
        raise ValueError(f"lag truncation must satisfy 0 <= m < T, got m={m}, T={T}")
    out = a.T @ b
    for h in range(1, m + 1):
        w = 1.0 - h / (m + 1.0)
        lagged = a[h:].T @ b[:-h]  # sum_t a_t b'_{t-h}
        out += w * lagged
        if two_sided:
            out += w * (b[h:].T @ a[:-h]).T  # sum_t a_{t-h} b'_t
    return out / T


def _psd_floor(S: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Clip numerically negative eigenvalues of a symmetric matrix at zero."""
    S = (S + S.T) / 2.0
    lam, V = np.linalg.eigh(S)
    if lam[0] >= 0:
        return S
    if lam[0] < -tol * max(abs(lam[-1]), 1.0):
        # genuinely indefinite input, let the caller see it
        return S
    return (V * np.maximum(lam, 0.0)) @ V.T


def fm_correction(sigma_uu: float, omega_uv: np.ndarray, omega_vv: np.ndarray):
    """Fully modified variance Omega_FM and the squared long-run correlation.

    Omega_FM = Sigma_uu - Omega_uv Omega_vv^{-1} Omega_vu, with
    rho2 = Omega_uv Omega_vv^{-1} Omega_vu / Sigma_uu clamped into [0, 1]
    (for one predictor this is Omega_uv^2 / (Sigma_uu * Omega_vv)).  A
    singular Omega_vv falls back to a thresholded pseudo-inverse and flags
    the result.

    Returns (omega_fm, rho2, singular_flag).
    """
    omega_uv = np.atleast_1d(np.asarray(omega_uv, dtype=float))
    omega_vv = np.atleast_2d(np.asarray(omega_vv, dtype=float))
    singular = False
    try:
        sol = np.linalg.solve(omega_vv, omega_uv)
        if not np.isfinite(sol).all():
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        singular = True
        sol = np.linalg.pinv(omega_vv, rcond=PINV_RTOL) @ omega_uv
    quad = float(omega_uv @ sol)
    if sigma_uu <= 0:
        rho2 = 0.0 if quad <= 0 else 1.0
    else:
        rho2 = min(max(quad / sigma_uu, 0.0), 1.0)
    omega_fm = sigma_uu * (1.0 - rho2)
    return omega_fm, rho2, singular


def long_run_estimates(u: np.ndarray, v: np.ndarray, m: int) -> LongRunEstimates:
    """Assemble all long-run quantities from residual series u (T,) and v (T, p).

    Sigma_uu is the plain residual variance; the Omega blocks use the
    two-sided Bartlett form with truncation m.
    """
    u = np.asarray(u, dtype=float).ravel()
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    n = min(len(u), v.shape[0])
    u, v = u[:n], v[:n]
    sigma_uu = float(u @ u) / n
    omega_uv = bartlett_lrcov(u, v, m, two_sided=True).ravel()
    omega_vv = _psd_floor(bartlett_lrcov(v, v, m, two_sided=True))
    omega_fm, rho2, singular = fm_correction(sigma_uu, omega_uv, omega_vv)
    return LongRunEstimates(sigma_uu, omega_uv, omega_vv, omega_fm, rho2, singular)
