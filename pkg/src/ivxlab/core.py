"""Shared value types: samples, configurations and result containers.

Everything here is an immutable value object (frozen dataclasses holding
read-only arrays), safe to share across worker processes.  No numerical
algorithms live in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

INTERCEPT_POLICIES = ("none", "stable", "unstable")


def _readonly(a, dtype=float, ndim=None) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    if ndim is not None and out.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got ndim={out.ndim}")
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class Sample:
    """A predictive-regression dataset.

    Row ``t`` (0-based) pairs ``y[t]`` with the lagged regressor vector
    ``X[t] = x_{t-1}``; the lag convention is fixed here, once, for every
    estimator.  ``intercept`` declares the intercept policy of the model
    ('none', 'stable' or 'unstable') and drives test dispatch downstream.
    """

    y: np.ndarray
    X: np.ndarray
    intercept: str = "stable"

    def __post_init__(self):
        object.__setattr__(self, "y", _readonly(self.y, ndim=1))
        object.__setattr__(self, "X", _readonly(np.atleast_2d(np.asarray(self.X, dtype=float).T).T, ndim=2))
        if self.intercept not in INTERCEPT_POLICIES:
            raise ValueError(f"intercept must be one of {INTERCEPT_POLICIES}, got {self.intercept!r}")
        T, p = self.X.shape
        if p < 1:
            raise ValueError("X needs at least one regressor column")
        if len(self.y) != T:
            raise ValueError(f"y has length {len(self.y)} but X has {T} rows")
        if T < 4 * (p + 1):
            raise ValueError(f"sample too short: T={T} < 4(p+1)={4 * (p + 1)}")
        if not (np.isfinite(self.y).all() and np.isfinite(self.X).all()):
            raise ValueError("sample contains non-finite entries")

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class PersistenceSpec:
    """Diagonal persistence coefficients and their decay rate.

    The autoregressive matrix of the regressors is
    ``R_T = I - diag(c) / T**gamma_x``; ``c`` entries may take any sign
    (negative values give explosive roots).
    """

    c: np.ndarray
    gamma_x: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c", _readonly(np.atleast_1d(self.c), ndim=1))
        if not np.isfinite(self.c).all():
            raise ValueError("persistence coefficients must be finite")
        if not np.isfinite(self.gamma_x) or self.gamma_x < 0:
            raise ValueError(f"gamma_x must be finite and >= 0, got {self.gamma_x}")

    @property
    def p(self) -> int:
        return len(self.c)

    def rho(self, T: int) -> np.ndarray:
        """Autoregressive roots 1 - c_i / T**gamma_x for sample size T."""
        return 1.0 - self.c / float(T) ** self.gamma_x


@dataclass(frozen=True, eq=False)
class InnovationCov:
    """Innovation covariance of the stacked errors (u_t, v_t')'.

    The assembled (p+1) x (p+1) matrix must be symmetric positive definite;
    construction is rejected otherwise, naming the offending eigenvalue.
    """

    sigma_uu: float
    sigma_uv: np.ndarray
    Sigma_vv: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma_uv", _readonly(np.atleast_1d(self.sigma_uv), ndim=1))
        object.__setattr__(self, "Sigma_vv", _readonly(np.atleast_2d(self.Sigma_vv), ndim=2))
        p = len(self.sigma_uv)
        if self.Sigma_vv.shape != (p, p):
            raise ValueError(f"Sigma_vv must be {p}x{p}, got {self.Sigma_vv.shape}")
        S = self.sigma_ee
        if not np.allclose(S, S.T):
            raise ValueError("assembled innovation covariance is not symmetric")
        lam = np.linalg.eigvalsh(S)
        if lam[0] <= 0:
            raise ValueError(f"innovation covariance is not positive definite (min eigenvalue {lam[0]:g})")

    @property
    def p(self) -> int:
        return len(self.sigma_uv)

    @property
    def sigma_ee(self) -> np.ndarray:
        """The (p+1) x (p+1) joint covariance, u first."""
        p = self.p
        S = np.empty((p + 1, p + 1))
        S[0, 0] = self.sigma_uu
        S[0, 1:] = self.sigma_uv
        S[1:, 0] = self.sigma_uv
        S[1:, 1:] = self.Sigma_vv
        return S

    @staticmethod
    def from_correlation(rho: float, sigma_u: float = 1.0, sigma_v: float = 1.0) -> "InnovationCov":
        """Bivariate (p=1) covariance with correlation rho between u and v."""
        return InnovationCov(sigma_u**2, np.array([rho * sigma_u * sigma_v]), np.array([[sigma_v**2]]))


@dataclass(frozen=True)
class IvxConfig:
    """Tuning of the instrument filtration and of the IVX covariance.

    ``c_z`` and ``delta_z`` control the mild persistence of the instruments,
    ``bandwidth_eta`` sets the kernel truncation m = floor(eta * n**(1/5)),
    ``bias_correct`` switches the kernel-weighted endogeneity correction of
    the estimator numerator on, and ``fm_covariance`` selects the fully
    modified covariance over the plain sandwich.
    """

    c_z: float = 1.0
    delta_z: float = 0.95
    bandwidth_eta: float = 1.0
    bias_correct: bool = False
    fm_covariance: bool = True

    def __post_init__(self):
        if not self.c_z > 0:
            raise ValueError(f"c_z must be > 0, got {self.c_z}")
        if not 0 < self.delta_z < 1:
            raise ValueError(f"delta_z must lie in (0, 1), got {self.delta_z}")
        if not self.bandwidth_eta > 0:
            raise ValueError(f"bandwidth_eta must be > 0, got {self.bandwidth_eta}")

    def rz(self, T: int) -> float:
        """Common instrument root 1 - c_z / T**delta_z."""
        return 1.0 - self.c_z / float(T) ** self.delta_z

    def bandwidth(self, n: int) -> int:
        """Lag truncation for kernel covariances on n observations."""
        return int(np.floor(self.bandwidth_eta * float(n) ** 0.2))


@dataclass(frozen=True)
class BreakWindow:
    """Trimming window for the candidate break search."""

    pi1: float = 0.15
    pi2: float = 0.85

    def __post_init__(self):
        if not 0 < self.pi1 < self.pi2 < 1:
            raise ValueError(f"need 0 < pi1 < pi2 < 1, got ({self.pi1}, {self.pi2})")

    def grid(self, T: int, p: int = 1) -> np.ndarray:
        """Candidate break times floor(pi1*T) .. ceil(pi2*T) (1-based t).

        Candidates are tightened so each regime keeps at least p+2
        observations; an empty result raises.
        """
        lo = max(int(np.floor(self.pi1 * T)), p + 2)
        hi = min(int(np.ceil(self.pi2 * T)), T - (p + 2))
        if lo > hi:
            raise ValueError(f"break window [{self.pi1}, {self.pi2}] leaves no valid candidate for T={T}, p={p}")
        return np.arange(lo, hi + 1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FitResult:
    """Output of one regression fit on a (sub-)sample."""

    beta: np.ndarray
    alpha: Optional[float]
    residuals: np.ndarray
    cov_beta: np.ndarray
    method: str  # "OLS", "IVX" or "IVX-BC"
    rank_deficient: bool = False

    def __post_init__(self):
        object.__setattr__(self, "beta", _readonly(self.beta, ndim=1))
        object.__setattr__(self, "residuals", _readonly(self.residuals, ndim=1))
        object.__setattr__(self, "cov_beta", _readonly(np.atleast_2d(self.cov_beta), ndim=2))

    @property
    def sigma2(self) -> float:
        """Residual variance, sum of squares over the fit length."""
        return float(self.residuals @ self.residuals) / len(self.residuals)


@dataclass(frozen=True, eq=False)
class WaldScan:
    """Per-candidate Wald values of one break scan and their supremum."""

    grid: np.ndarray
    values: np.ndarray
    flagged: np.ndarray = None

    def __post_init__(self):
        object.__setattr__(self, "grid", _readonly(self.grid, dtype=np.int64, ndim=1))
        object.__setattr__(self, "values", _readonly(self.values, ndim=1))
        if self.flagged is None:
            object.__setattr__(self, "flagged", _readonly(np.zeros(len(self.grid)), dtype=bool, ndim=1))
        else:
            object.__setattr__(self, "flagged", _readonly(self.flagged, dtype=bool, ndim=1))
        if len(self.grid) == 0:
            raise ValueError("empty scan grid")
        if len(self.values) != len(self.grid) or len(self.flagged) != len(self.grid):
            raise ValueError("grid, values and flags must have equal length")
        if (self.values < 0).any() or not np.isfinite(self.values).all():
            raise ValueError("scan values must be finite and nonnegative")

    @property
    def sup_value(self) -> float:
        return float(self.values.max())

    @property
    def argmax_index(self) -> int:
        """Grid point (1-based break time t) attaining the supremum."""
        return int(self.grid[int(np.argmax(self.values))])


@dataclass(frozen=True, eq=False)
class CriticalValueTable:
    """Simulated or bootstrapped quantiles for one statistic family."""

    statistic: str
    p: int
    window: tuple
    quantiles: tuple  # ((alpha, c_alpha), ...) sorted by alpha ascending
    replications: int
    seed: int
    method: str  # "simulated-limit" or "bootstrap"

    def __post_init__(self):
        q = tuple(sorted((float(a), float(c)) for a, c in self.quantiles))
        object.__setattr__(self, "quantiles", q)
        if self.replications <= 0:
            raise ValueError("replication count must be positive")
        if self.method not in ("simulated-limit", "bootstrap"):
            raise ValueError(f"unknown method {self.method!r}")
        cvs = [c for _, c in q]
        if any(c2 >= c1 for c1, c2 in zip(cvs, cvs[1:])):
            raise ValueError("critical values must be strictly decreasing in alpha")

    def cv(self, alpha: float) -> float:
        for a, c in self.quantiles:
            if abs(a - alpha) < 1e-12:
                return c
        raise KeyError(f"no critical value tabulated at alpha={alpha}")


@dataclass(frozen=True, eq=False)
class TestReport:
    """Decision record for one test run."""

    statistic: str
    value: float
    critical_value: float
    alpha: float
    scan: Optional[WaldScan] = None
    T: Optional[int] = None

    @property
    def reject(self) -> bool:
        return self.value > self.critical_value

    @property
    def break_fraction(self) -> Optional[float]:
        if self.scan is None or self.T is None:
            return None
        return self.scan.argmax_index / self.T


@dataclass(frozen=True, eq=False)
class McExperiment:
    """One Monte Carlo design: DGP, sample size, statistic and seeds."""

    theta1: tuple  # (alpha, beta vector)
    theta2: tuple
    break_fraction: Optional[float]
    persistence: "PersistenceSpec"
    innovations: "InnovationCov"
    T: int
    replications: int
    level: float
    statistic: str
    ivx: IvxConfig = field(default_factory=IvxConfig)
    window: BreakWindow = field(default_factory=BreakWindow)
    intercept: str = "stable"
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("need at least one replication")
        if not 0 < self.level < 1:
            raise ValueError(f"nominal level must lie in (0, 1), got {self.level}")
        if self.intercept not in INTERCEPT_POLICIES:
            raise ValueError(f"intercept must be one of {INTERCEPT_POLICIES}")
