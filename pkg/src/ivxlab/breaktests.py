"""Wald statistics for predictability and single-break testing.

The family covers the full-sample instrumented Wald (a chi-square test of
linear restrictions on the slopes), sup-Wald break scans under least-squares
and instrumented estimation, the intercept-break statistic, and the joint
predictability-plus-break combinations.  Intercept handling follows the
sample's policy: 'none' drops intercepts from all statistics, 'stable' keeps
a common mean, 'unstable' allows the intercept to break and enables the
intercept statistics.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from ._kernels import OLS_NONE, OLS_STABLE, OLS_UNSTABLE
from .core import BreakWindow, IvxConfig, Sample, TestReport, WaldScan
from .estimators import build_instruments, fit_var1, ivx_fit

_OLS_MODE = {"none": OLS_NONE, "stable": OLS_STABLE, "unstable": OLS_UNSTABLE}


def wald_ivx_full(sample: Sample, config: IvxConfig = None, restriction=None, r0=None) -> float:
    """Full-sample instrumented Wald statistic for H0: R beta = r0.

    Targets a chi-square law with q = rank(R) degrees of freedom under the
    null whatever the regressor persistence.  R defaults to the identity
    (joint significance of all slopes), r0 to zero.
    """
    config = config or IvxConfig()
    fit = ivx_fit(sample, config=config)
    p = sample.p
    R = np.eye(p) if restriction is None else np.atleast_2d(np.asarray(restriction, dtype=float))
    q = R.shape[0]
    if R.shape[1] != p or np.linalg.matrix_rank(R) != q or q > p:
        raise ValueError(f"restriction must be full row rank q x p with q <= p, got shape {R.shape}")
    r0 = np.zeros(q) if r0 is None else np.atleast_1d(np.asarray(r0, dtype=float))
    d = R @ fit.beta - r0
    if not d.any():
        return 0.0
    V = R @ fit.cov_beta @ R.T
    try:
        w = float(d @ np.linalg.solve(V, d))
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(f"singular restricted covariance for restriction {R.tolist()}")
    if not np.isfinite(w):
        raise np.linalg.LinAlgError(f"non-finite Wald value for restriction {R.tolist()}")
    return max(w, 0.0)


def sup_wald_ols(sample: Sample, window: BreakWindow = None) -> WaldScan:
    """Least-squares break scan over the trimming window.

    Each candidate t fits the two regimes, pools their residual variance and
    forms the coefficient-difference Wald value; the scan keeps every value,
    the supremum and its location.
    """
    window = window or BreakWindow()
    grid = window.grid(sample.T, sample.p)
    values, flags = _kernels.ols_scan(sample.y, sample.X, grid, _OLS_MODE[sample.intercept])
    return WaldScan(grid, values, flags)


def _ivx_scan_raw(sample: Sample, window: BreakWindow, config: IvxConfig, restart: bool = True):
    config = config or IvxConfig()
    window = window or BreakWindow()
    grid = window.grid(sample.T, sample.p)
    rz = config.rz(sample.T)
    Z = build_instruments(sample.X, config, rz=rz).Z
    vhat = fit_var1(sample.X)[2]
    demean = sample.intercept != "none"
    wb, wa, flags = _kernels.ivx_scan(sample.y, sample.X, Z, vhat, grid, rz, demean, restart, config)
    return grid, wb, wa, flags


def sup_wald_ivx_beta(sample: Sample, window: BreakWindow = None, config: IvxConfig = None, restart: bool = True) -> WaldScan:
    """Instrumented slope-break scan (Chow-type values over the window).

    Regime estimates and covariances are computed regime by regime; regime-2
    instruments restart at the candidate unless ``restart`` is disabled.
    """
    grid, wb, _, flags = _ivx_scan_raw(sample, window, config, restart)
    return WaldScan(grid, wb, flags)


def wald_ivx_alpha(sample: Sample, t: int, config: IvxConfig = None, restart: bool = True) -> float:
    """Intercept-break Wald value at one candidate t.

    Intercepts come from the instrument-mean estimator; their variances add
    the residual-mean term to the slope-covariance quadratic form.
    """
    if sample.intercept == "none":
        raise ValueError("intercept-break statistic undefined for intercept policy 'none'")
    if not sample.p + 2 <= t <= sample.T - (sample.p + 2):
        raise ValueError(f"candidate t={t} leaves a regime with fewer than p+2 observations")
    config = config or IvxConfig()
    rz = config.rz(sample.T)
    Z = build_instruments(sample.X, config, rz=rz).Z
    vhat = fit_var1(sample.X)[2]
    grid = np.array([t], dtype=np.int64)
    _, wa, _ = _kernels.ivx_scan(sample.y, sample.X, Z, vhat, grid, rz, True, restart, config)
    return float(wa[0])


def sup_wald_ivx_alpha(sample: Sample, window: BreakWindow = None, config: IvxConfig = None, restart: bool = True) -> WaldScan:
    """Scan of the intercept-break statistic over the trimming window."""
    if sample.intercept == "none":
        raise ValueError("intercept-break statistic undefined for intercept policy 'none'")
    grid, _, wa, flags = _ivx_scan_raw(sample, window, config, restart)
    return WaldScan(grid, wa, flags)


def joint_wald_beta(sample: Sample, window: BreakWindow = None, config: IvxConfig = None, restart: bool = True):
    """Joint predictability-and-break statistic on the slopes.

    The full-sample Wald is constant over candidates, so the supremum only
    binds the break component; the scan stores the summed values so its
    supremum equals the returned statistic.
    """
    config = config or IvxConfig()
    w_full = wald_ivx_full(sample, config)
    grid, wb, _, flags = _ivx_scan_raw(sample, window, config, restart)
    scan = WaldScan(grid, w_full + wb, flags)
    return scan.sup_value, scan


def joint_wald_alpha_beta(sample: Sample, window: BreakWindow = None, config: IvxConfig = None, restart: bool = True):
    """Joint statistic adding the intercept-break component to the scan."""
    if sample.intercept == "none":
        raise ValueError("intercept-break statistic undefined for intercept policy 'none'")
    config = config or IvxConfig()
    w_full = wald_ivx_full(sample, config)
    grid, wb, wa, flags = _ivx_scan_raw(sample, window, config, restart)
    scan = WaldScan(grid, w_full + wb + wa, flags)
    return scan.sup_value, scan


STATISTICS = (
    "ivx",
    "sup-ols",
    "sup-ivx-beta",
    "sup-ivx-alpha",
    "joint-beta",
    "joint-alpha-beta",
)


def compute_statistic(sample: Sample, statistic: str, window: BreakWindow = None, config: IvxConfig = None):
    """Evaluate one named statistic; returns (value, scan-or-None)."""
    if statistic == "ivx":
        return wald_ivx_full(sample, config), None
    if statistic == "sup-ols":
        scan = sup_wald_ols(sample, window)
        return scan.sup_value, scan
    if statistic == "sup-ivx-beta":
        scan = sup_wald_ivx_beta(sample, window, config)
        return scan.sup_value, scan
    if statistic == "sup-ivx-alpha":
        scan = sup_wald_ivx_alpha(sample, window, config)
        return scan.sup_value, scan
    if statistic == "joint-beta":
        return joint_wald_beta(sample, window, config)
    if statistic == "joint-alpha-beta":
        return joint_wald_alpha_beta(sample, window, config)
    raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")


def run_test(sample: Sample, statistic: str, critical_value: float, alpha: float, window: BreakWindow = None, config: IvxConfig = None) -> TestReport:
    """Compute a statistic and package the decision against a critical value."""
    value, scan = compute_statistic(sample, statistic, window, config)
    return TestReport(statistic, value, float(critical_value), float(alpha), scan=scan, T=sample.T)
