"""Simulation of the predictive system used by the Monte Carlo experiments.

Generates correlated Gaussian innovations, autoregressive regressors of any
persistence class (stationary, mildly integrated, near-integrated, explosive)
and samples with an optional single parameter break.  All draws are
deterministic in the seed; replication seeds are derived from a master seed
with a counter-based rule so results do not depend on scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .core import Sample, PersistenceSpec, InnovationCov


def derive_seed(master_seed: int, *keys) -> np.random.SeedSequence:
    """Child seed for a (cell, replication) key tuple.

    Floats are mapped through their IEEE bit patterns so any (c, T, rho,
    replication) combination hashes stably regardless of worker order.
    """
    words = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    for k in keys:
        if isinstance(k, (int, np.integer)):
            words.append(int(k) & 0xFFFFFFFFFFFFFFFF)
        else:
            words.append(int(np.float64(k).view(np.uint64)))
    return np.random.SeedSequence(words)


@dataclass(frozen=True, eq=False)
class DgpParams:
    """Parameters of the break-in-parameters data generating process.

    ``theta1`` and ``theta2`` are (intercept, slope vector) pairs for the two
    regimes; ``break_fraction`` of None generates a stable-parameter sample
    and ``theta2`` is ignored.
    """

    theta1: tuple
    theta2: tuple = None
    break_fraction: Optional[float] = None
    persistence: PersistenceSpec = None
    innovations: InnovationCov = None
    x0: np.ndarray = None
    intercept: str = "stable"

    def __post_init__(self):
        a1, b1 = self.theta1
        b1 = np.atleast_1d(np.asarray(b1, dtype=float))
        object.__setattr__(self, "theta1", (float(a1), b1))
        if self.theta2 is None:
            object.__setattr__(self, "theta2", self.theta1)
        else:
            a2, b2 = self.theta2
            b2 = np.atleast_1d(np.asarray(b2, dtype=float))
            if len(b2) != len(b1):
                raise ValueError("theta1 and theta2 slope vectors differ in length")
            object.__setattr__(self, "theta2", (float(a2), b2))
        p = self.innovations.p
        if len(b1) != p or self.persistence.p != p:
            raise ValueError("slope, persistence and innovation dimensions disagree")
        if self.break_fraction is not None and not 0 < self.break_fraction < 1:
            raise ValueError(f"break fraction must lie in (0, 1), got {self.break_fraction}")
        x0 = np.zeros(p) if self.x0 is None else np.atleast_1d(np.asarray(self.x0, dtype=float))
        if len(x0) != p:
            raise ValueError("x0 has wrong length")
        object.__setattr__(self, "x0", x0)

    @property
    def p(self) -> int:
        return self.innovations.p


def draw_innovations(T: int, cov: InnovationCov, seed) -> np.ndarray:
    """T independent rows from N(0, Sigma_ee), via a Cholesky factor.

    The covariance must be positive definite (InnovationCov enforces this on
    construction, naming the offending eigenvalue otherwise).
    """
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(cov.sigma_ee)
    return rng.standard_normal((T, cov.p + 1)) @ L.T


def simulate_lur(T: int, spec: PersistenceSpec, v: np.ndarray, x0=None) -> np.ndarray:
    """Run x_t = (I - C/T**gamma_x) x_{t-1} + v_t for t = 1..T.

    Returns the (T+1) x p path including the initial row x_0.
    """
    v = np.atleast_2d(np.asarray(v, dtype=float).T).T
    if v.shape != (T, spec.p):
        raise ValueError(f"innovation matrix must be {T}x{spec.p}, got {v.shape}")
    rho = spec.rho(T)
    x = np.empty((T + 1, spec.p))
    x[0] = 0.0 if x0 is None else np.asarray(x0, dtype=float)
    for i in range(spec.p):
        # lfilter runs the same one-multiply-one-add recursion in C
        x[1:, i], _ = lfilter([1.0], [1.0, -rho[i]], v[:, i], zi=[rho[i] * x[0, i]])
    return x


def simulate_sample(params: DgpParams, T: int, seed) -> Sample:
    """Draw one Sample of length T from the break DGP.

    Regime 1 uses theta1 for t <= k = floor(break_fraction * T), regime 2
    uses theta2 after; the regressor path and the contemporaneous u/v
    correlation come from the innovation covariance.
    """
    e = draw_innovations(T, params.innovations, seed)
    u, v = e[:, 0], e[:, 1:]
    path = simulate_lur(T, params.persistence, v, params.x0)
    X = path[:T]  # row t holds x_{t-1}
    a1, b1 = params.theta1
    y = a1 + X @ b1 + u
    if params.break_fraction is not None:
        k = int(np.floor(params.break_fraction * T))
        a2, b2 = params.theta2
        y[k:] = a2 + X[k:] @ b2 + u[k:]
    return Sample(y, X, intercept=params.intercept)
