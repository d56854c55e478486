"""Backend selection for the hot scan kernels.

A compiled extension implements the break scans; a pure-NumPy fallback with
identical semantics is used when the extension is unavailable (or when
IVXLAB_DISABLE_EXT=1 forces it).  Candidates the compiled path flags as
numerically degenerate are recomputed through the fallback, which handles
singular systems with thresholded pseudo-inverses.
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_backend
from .numpy_backend import OLS_NONE, OLS_STABLE, OLS_UNSTABLE, restarted_instruments

_compiled = None
if os.environ.get("IVXLAB_DISABLE_EXT", "") != "1":
    try:
        from . import _scan as _compiled
    except ImportError:
        _compiled = None

HAVE_COMPILED = _compiled is not None
BACKEND = "compiled" if HAVE_COMPILED else "numpy"


def _c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def ols_scan(y, X, grid, mode, backend=None):
    backend = backend or BACKEND
    if backend == "numpy" or _compiled is None:
        return numpy_backend.ols_scan(y, X, grid, mode)
    X2 = np.atleast_2d(np.asarray(X, dtype=float).T).T
    values, flags = _compiled.ols_scan(_c(y), _c(X2), _c(grid, np.int64), int(mode))
    flags = flags.astype(bool)
    if flags.any():
        sub = np.asarray(grid)[flags]
        v2, f2 = numpy_backend.ols_scan(y, X, sub, mode)
        values[flags] = v2
    return values, flags


def ivx_scan(y, X, Zfull, vhat_full, grid, rz, demean, restart, config, backend=None):
    backend = backend or BACKEND
    if backend == "numpy" or _compiled is None:
        return numpy_backend.ivx_scan(y, X, Zfull, vhat_full, grid, rz, demean, restart, config)
    X2 = np.atleast_2d(np.asarray(X, dtype=float).T).T
    Z2 = np.atleast_2d(np.asarray(Zfull, dtype=float).T).T
    V2 = np.atleast_2d(np.asarray(vhat_full, dtype=float).T).T
    wb, wa, flags = _compiled.ivx_scan(
        _c(y),
        _c(X2),
        _c(Z2),
        _c(V2),
        _c(grid, np.int64),
        float(rz),
        int(bool(demean)),
        int(bool(restart)),
        int(bool(config.fm_covariance)),
        int(bool(config.bias_correct)),
        float(config.bandwidth_eta),
    )
    flags = flags.astype(bool)
    if flags.any():
        sub = np.asarray(grid)[flags]
        wb2, wa2, _ = numpy_backend.ivx_scan(y, X, Zfull, vhat_full, sub, rz, demean, restart, config)
        wb[flags] = wb2
        wa[flags] = wa2
    return wb, wa, flags
