"""Pure-NumPy scan kernels; the reference semantics for the compiled twin.

The break scans dominate Monte Carlo runtime, so a compiled implementation
of the same routines is preferred at import time when available.  This
module stays importable everywhere and is the arbiter of correctness: the
compiled kernels are equivalence-tested against it.
"""

from __future__ import annotations

import numpy as np

from ..core import IvxConfig
from ..estimators import _ivx_pieces

PINV_RTOL = 1e-12

OLS_NONE, OLS_STABLE, OLS_UNSTABLE = 0, 1, 2


def _chol_quad(V: np.ndarray, d: np.ndarray):
    """d' V^{-1} d with a pseudo-inverse fallback; returns (value, flagged)."""
    try:
        w = np.linalg.solve(V, d)
        q = float(d @ w)
        if np.isfinite(q):
            return q, False
    except np.linalg.LinAlgError:
        pass
    return float(d @ np.linalg.pinv(V, rcond=PINV_RTOL) @ d), True


def ols_scan(y: np.ndarray, X: np.ndarray, grid: np.ndarray, mode: int):
    """Per-candidate break Wald values for the least-squares fits.

    mode 0: slope-only regimes (no intercept anywhere);
    mode 1: one shared intercept, regime slopes tested;
    mode 2: per-regime intercepts, the full coefficient vector tested.
    The scale is the pooled two-regime residual variance at each candidate.
    """
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    grid = np.asarray(grid, dtype=np.int64)
    T, p = X.shape
    G = len(grid)

    cxx = np.cumsum(X[:, :, None] * X[:, None, :], axis=0)
    cxy = np.cumsum(X * y[:, None], axis=0)
    cyy = np.cumsum(y * y)
    cx = np.cumsum(X, axis=0)
    cy = np.cumsum(y)

    idx = grid - 1
    Sxx1, Sxy1 = cxx[idx], cxy[idx]
    Sxx2, Sxy2 = cxx[-1] - Sxx1, cxy[-1] - Sxy1
    Syy1 = cyy[idx]
    Syy2 = cyy[-1] - Syy1
    Sx1, Sy1 = cx[idx], cy[idx]
    Sx2, Sy2 = cx[-1] - Sx1, cy[-1] - Sy1
    n1 = grid.astype(float)
    n2 = T - n1

    values = np.empty(G)
    flags = np.zeros(G, dtype=bool)

    if mode == OLS_NONE:
        A1, b1 = Sxx1, Sxy1
        A2, b2 = Sxx2, Sxy2
    elif mode == OLS_UNSTABLE:
        d = p + 1
        A1 = np.empty((G, d, d))
        A1[:, 0, 0] = n1
        A1[:, 0, 1:] = Sx1
        A1[:, 1:, 0] = Sx1
        A1[:, 1:, 1:] = Sxx1
        A2 = np.empty((G, d, d))
        A2[:, 0, 0] = n2
        A2[:, 0, 1:] = Sx2
        A2[:, 1:, 0] = Sx2
        A2[:, 1:, 1:] = Sxx2
        b1 = np.concatenate([Sy1[:, None], Sxy1], axis=1)
        b2 = np.concatenate([Sy2[:, None], Sxy2], axis=1)
    elif mode == OLS_STABLE:
        # one joint design [1, x*I1, x*I2]; only the slope blocks are tested
        d = 2 * p + 1
        A = np.zeros((G, d, d))
        A[:, 0, 0] = T
        A[:, 0, 1 : p + 1] = Sx1
        A[:, 1 : p + 1, 0] = Sx1
        A[:, 0, p + 1 :] = Sx2
        A[:, p + 1 :, 0] = Sx2
        A[:, 1 : p + 1, 1 : p + 1] = Sxx1
        A[:, p + 1 :, p + 1 :] = Sxx2
        b = np.concatenate([np.full((G, 1), cy[-1]), Sxy1, Sxy2], axis=1)
        for g in range(G):
            try:
                Ai = np.linalg.inv(A[g])
                if not np.isfinite(Ai).all():
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                Ai = np.linalg.pinv(A[g], rcond=PINV_RTOL)
                flags[g] = True
            theta = Ai @ b[g]
            ssr = cyy[-1] - theta @ b[g]
            sigma2 = max(ssr, 0.0) / T
            dbeta = theta[1 : p + 1] - theta[p + 1 :]
            V = Ai[1 : p + 1, 1 : p + 1] + Ai[p + 1 :, p + 1 :] - Ai[1 : p + 1, p + 1 :] - Ai[p + 1 :, 1 : p + 1]
            q, f = _chol_quad(V, dbeta)
            flags[g] |= f
            values[g] = max(q, 0.0) / sigma2 if sigma2 > 0 else 0.0
        return values, flags
    else:
        raise ValueError(f"unknown scan mode {mode}")

    for g in range(G):
        f = False
        th = []
        Vi = []
        ssr = 0.0
        for Aj, bj, Syyj in ((A1[g], b1[g], Syy1[g]), (A2[g], b2[g], Syy2[g])):
            try:
                Aji = np.linalg.inv(Aj)
                if not np.isfinite(Aji).all():
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                Aji = np.linalg.pinv(Aj, rcond=PINV_RTOL)
                f = True
            tj = Aji @ bj
            th.append(tj)
            Vi.append(Aji)
            ssr += Syyj - tj @ bj
        sigma2 = max(ssr, 0.0) / T
        dtheta = th[0] - th[1]
        q, f2 = _chol_quad(Vi[0] + Vi[1], dtheta)
        flags[g] = f or f2
        values[g] = max(q, 0.0) / sigma2 if sigma2 > 0 else 0.0
    return values, flags


def restarted_instruments(Zfull: np.ndarray, rz: float, k: int) -> np.ndarray:
    """Regime-2 instruments reset to zero at row k.

    Uses the identity that the restarted recursion differs from the full one
    by a geometrically decaying multiple of the value at the reset row.
    """
    n2 = Zfull.shape[0] - k
    w = rz ** np.arange(n2)
    return Zfull[k:] - w[:, None] * Zfull[k]


def ivx_scan(
    y: np.ndarray,
    X: np.ndarray,
    Zfull: np.ndarray,
    vhat_full: np.ndarray,
    grid: np.ndarray,
    rz: float,
    demean: bool,
    restart: bool,
    config: IvxConfig,
):
    """Per-candidate instrumented break Wald values for slope and intercept.

    Regime 1 always uses the origin-started instruments; regime 2 restarts
    the recursion at the candidate (or keeps the full-sample instruments
    when ``restart`` is off).  Returns (w_beta, w_alpha, flags); w_alpha is
    NaN-free only when ``demean`` holds.
    """
    y = np.asarray(y, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float).T).T
    grid = np.asarray(grid, dtype=np.int64)
    T = X.shape[0]
    G = len(grid)
    w_beta = np.empty(G)
    w_alpha = np.full(G, np.nan)
    flags = np.zeros(G, dtype=bool)

    for g, k in enumerate(grid):
        k = int(k)
        z2 = restarted_instruments(Zfull, rz, k) if restart else Zfull[k:]
        p1 = _ivx_pieces(y[:k], X[:k], Zfull[:k], demean, config, vhat=vhat_full[: k - 1])
        p2 = _ivx_pieces(y[k:], X[k:], z2, demean, config, vhat=vhat_full[k : T - 1])
        dbeta = p1["beta"] - p2["beta"]
        f = p1["flagged"] or p2["flagged"]
        if config.fm_covariance and demean:
            V = p1["Q"] + p2["Q"]
            q, f2 = _chol_quad(V, dbeta)
            w_beta[g] = max(q, 0.0)
        else:
            sigma2 = (p1["sigma2"] * p1["n"] + p2["sigma2"] * p2["n"]) / T
            V = sigma2 * (p1["sandwich"] + p2["sandwich"])
            q, f2 = _chol_quad(V, dbeta)
            w_beta[g] = max(q, 0.0)
        f = f or f2
        if demean:
            q1 = p1["Q"] if config.fm_covariance else p1["sigma2"] * p1["sandwich"]
            q2 = p2["Q"] if config.fm_covariance else p2["sigma2"] * p2["sandwich"]
            om1 = p1["sigma2"] / p1["n"] + float(p1["zbar"] @ q1 @ p1["zbar"])
            om2 = p2["sigma2"] / p2["n"] + float(p2["zbar"] @ q2 @ p2["zbar"])
            da = p1["alpha"] - p2["alpha"]
            denom = om1 + om2
            if denom <= 0 or not np.isfinite(denom):
                w_alpha[g], f = 0.0, True
            else:
                w_alpha[g] = da * da / denom
        flags[g] = f
    return w_beta, w_alpha, flags
