"""Simulation of the nonstandard limit laws and their critical values.

Discretized Brownian motions and mean-reverting diffusions drive the limit
functionals of the break scans: the normalized squared Brownian bridge for
the pivotal cases, ratio functionals of stochastic integrals for the
near-integrated and explosive cases, and the joint laws adding an
independent chi-square component.  All stochastic integrals use
left-endpoint sums; demeaned paths subtract the left-endpoint grid mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .core import BreakWindow, CriticalValueTable

LAWS = ("sup-nbb", "theorem2", "theorem1-ols", "joint-cor2", "joint-prop2")
GAMMA_CLASSES = ("sub", "unit", "super")  # gamma_x < 1, = 1, > 1
DEFAULT_ALPHAS = (0.10, 0.05, 0.025, 0.01)


@dataclass(frozen=True, eq=False)
class OuPath:
    """Discretized mean-reverting diffusion on [0, 1]; path(0) = 0."""

    values: np.ndarray
    c: float
    n: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.n < 1 or len(v) != self.n + 1 or v[0] != 0.0:
            raise ValueError("path must start at zero with n+1 grid values")


@dataclass(frozen=True, eq=False)
class LimitLawSpec:
    """Which limit functional to simulate, and its nuisance inputs.

    ``gamma_class`` 'sub' covers stationary and mildly integrated regressors
    (the pivotal bridge case), 'unit' the near-integrated case driven by a
    diffusion with reversion ``c``, 'super' the explosive-rate case driven
    by a demeaned Brownian motion.  ``rho`` and ``intercept`` only matter
    for the least-squares law.
    """

    kind: str
    p: int = 1
    window: BreakWindow = field(default_factory=BreakWindow)
    gamma_class: str = "sub"
    c: float = 1.0
    rho: float = 0.0
    intercept: bool = False
    omega_xx: np.ndarray = None

    def __post_init__(self):
        if self.kind not in LAWS:
            raise ValueError(f"unknown law {self.kind!r}; choose from {LAWS}")
        if self.gamma_class not in GAMMA_CLASSES:
            raise ValueError(f"unknown persistence class {self.gamma_class!r}")
        if self.p < 1:
            raise ValueError("dimension p must be >= 1")
        if self.omega_xx is not None:
            om = np.atleast_2d(np.asarray(self.omega_xx, dtype=float))
            if om.shape != (self.p, self.p):
                raise ValueError(f"omega_xx must be {self.p}x{self.p}")
            object.__setattr__(self, "omega_xx", om)


def simulate_ou_path(c: float, n: int, seed) -> OuPath:
    """One path of x_j = (1 - c/n) x_{j-1} + eps_j / sqrt(n), x_0 = 0.

    Positive c mean-reverts, c = 0 gives scaled random-walk partial sums
    (a Brownian motion), negative c is explosive.
    """
    if n < 1:
        raise ValueError("need at least one step")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n) / np.sqrt(n)
    path = np.empty(n + 1)
    path[0] = 0.0
    path[1:] = lfilter([1.0], [1.0, -(1.0 - c / n)], eps)
    return OuPath(path, float(c), int(n))


def _ou_panel(dW: np.ndarray, c) -> np.ndarray:
    """Vectorized diffusion recursion over (draws, n, p) increments."""
    B, n, p = dW.shape
    c = np.broadcast_to(np.atleast_1d(np.asarray(c, dtype=float)), (p,))
    out = np.zeros((B, n + 1, p))
    for i in range(p):
        out[:, 1:, i] = lfilter([1.0], [1.0, -(1.0 - c[i] / n)], dW[:, :, i], axis=1)
    return out


def _grid_indices(window: BreakWindow, n: int):
    jlo = int(np.ceil(window.pi1 * n))
    jhi = int(np.floor(window.pi2 * n))
    j = np.arange(max(jlo, 1), min(jhi, n - 1) + 1)
    return j, j / n


def _batch_quad(M: np.ndarray, N: np.ndarray) -> np.ndarray:
    """N' M^{-1} N over stacked (..., p, p) and (..., p), pinv on failure."""
    try:
        sol = np.linalg.solve(M, N[..., None])[..., 0]
    except np.linalg.LinAlgError:
        flat_m = M.reshape(-1, M.shape[-1], M.shape[-1])
        flat_n = N.reshape(-1, N.shape[-1])
        sol = np.empty_like(flat_n)
        for i in range(flat_m.shape[0]):
            try:
                sol[i] = np.linalg.solve(flat_m[i], flat_n[i])
            except np.linalg.LinAlgError:
                sol[i] = np.linalg.pinv(flat_m[i], rcond=1e-12) @ flat_n[i]
        sol = sol.reshape(N.shape)
    return np.einsum("...i,...i->...", N, sol)


def _theorem2_sup(spec: LimitLawSpec, rng, nblock: int, n: int):
    """Per-draw sup of the slope-scan limit functional, plus the endpoint
    chi-square component B(1)'B(1) (used by the joint laws)."""
    F, chi = _theorem2_path_values(spec, rng, nblock, n)
    return F.max(axis=1), chi


def _theorem1_sup(spec: LimitLawSpec, rng, nblock: int, n: int):
    """Per-draw sup of the least-squares scan limit functional."""
    p = spec.p
    d = p + 1 if spec.intercept else p
    j, pi = _grid_indices(spec.window, n)
    dWv = rng.standard_normal((nblock, n, p)) / np.sqrt(n)
    dW0 = rng.standard_normal((nblock, n)) / np.sqrt(n)
    rho = float(spec.rho)
    if p == 1:
        dBu = rho * dWv[:, :, 0] + np.sqrt(max(1 - rho * rho, 0.0)) * dW0
    else:
        dBu = rho * dWv.sum(axis=2) / np.sqrt(p) + np.sqrt(max(1 - rho * rho, 0.0)) * dW0
    K = _ou_panel(dWv, spec.c)
    if spec.intercept:
        Kt = np.concatenate([np.ones((nblock, n, 1)), K[:, :n, :]], axis=2)
    else:
        Kt = K[:, :n, :]
    G = np.cumsum(Kt[:, :, :, None] * Kt[:, :, None, :], axis=1) / n
    H = np.cumsum(Kt * dBu[:, :, None], axis=1)
    Gg, G1 = G[:, j - 1], G[:, -1]
    Hg, H1 = H[:, j - 1], H[:, -1]
    G2 = G1[:, None, :, :] - Gg
    H2 = H1[:, None, :] - Hg
    N = _batch_solve(Gg, Hg) - _batch_solve(G2, H2)
    mid = Gg - np.einsum("bgij,bgjk->bgik", Gg, _batch_solve(np.broadcast_to(G1[:, None], Gg.shape), Gg))
    F = np.einsum("bgi,bgij,bgj->bg", N, mid, N)
    return F.max(axis=1)


def _batch_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    try:
        if b.ndim == A.ndim - 1:
            return np.linalg.solve(A, b[..., None])[..., 0]
        return np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        Ai = np.linalg.pinv(A, rcond=1e-12)
        if b.ndim == A.ndim - 1:
            return np.einsum("...ij,...j->...i", Ai, b)
        return np.einsum("...ij,...jk->...ik", Ai, b)


def simulate_limit_draws(spec: LimitLawSpec, reps: int, n: int = 1000, seed=0) -> np.ndarray:
    """Independent draws of the limiting statistic named by the spec."""
    if reps < 1:
        raise ValueError("need at least one draw")
    rng = np.random.default_rng(seed)
    block = max(1, min(reps, int(4e6 / (n * max(spec.p, 1)))))
    out = np.empty(reps)
    done = 0
    while done < reps:
        nb = min(block, reps - done)
        if spec.kind == "sup-nbb":
            sub = LimitLawSpec("theorem2", spec.p, spec.window, "sub")
            vals, _ = _theorem2_sup(sub, rng, nb, n)
        elif spec.kind == "theorem2":
            vals, _ = _theorem2_sup(spec, rng, nb, n)
        elif spec.kind == "theorem1-ols":
            vals = _theorem1_sup(spec, rng, nb, n)
        elif spec.kind == "joint-cor2":
            vals, chi = _theorem2_sup(spec, rng, nb, n)
            vals = vals + chi
        elif spec.kind == "joint-prop2":
            # the intercept component is an independent one-dimensional bridge
            dWa = rng.standard_normal((nb, n)) / np.sqrt(n)
            Ba = np.cumsum(dWa, axis=1)
            j, pi = _grid_indices(spec.window, n)
            bb = Ba[:, j - 1] - pi[None, :] * Ba[:, -1][:, None]
            nbb_a = bb * bb / (pi * (1 - pi))[None, :]
            beta_part, chi = _theorem2_path_values(spec, rng, nb, n)
            vals = chi + (nbb_a + beta_part).max(axis=1)
        else:
            raise ValueError(f"unknown law {spec.kind!r}")
        out[done : done + nb] = vals
        done += nb
    return out


def _theorem2_path_values(spec: LimitLawSpec, rng, nblock: int, n: int):
    """Grid values (not the sup) of the slope functional, plus chi part."""
    p = spec.p
    j, pi = _grid_indices(spec.window, n)
    dWu = rng.standard_normal((nblock, n, p)) / np.sqrt(n)
    Bu = np.cumsum(dWu, axis=1)
    Bg = Bu[:, j - 1, :]
    B1 = Bu[:, -1, :]
    chi = np.einsum("bp,bp->b", B1, B1)
    if spec.gamma_class == "sub":
        N = Bg - pi[None, :, None] * B1[:, None, :]
        F = np.einsum("bgp,bgp->bg", N, N) / (pi * (1 - pi))[None, :]
        return F, chi
    dWv = rng.standard_normal((nblock, n, p)) / np.sqrt(n)
    J = _ou_panel(dWv, spec.c) if spec.gamma_class == "unit" else np.concatenate(
        [np.zeros((nblock, 1, p)), np.cumsum(dWv, axis=1)], axis=1
    )
    Jc = J - J[:, :n, :].mean(axis=1, keepdims=True)
    dJ = J[:, 1:, :] - J[:, :-1, :]
    # cumulative Ito sums of (demeaned path) x (increment)'
    S = np.cumsum(Jc[:, :n, :, None] * dJ[:, :, None, :], axis=1)
    Sg, S1 = S[:, j - 1], S[:, -1]
    om = np.eye(p) if spec.omega_xx is None else spec.omega_xx
    denom = om[None, :, :] + S1
    numer = pi[None, :, None, None] * om[None, None, :, :] + Sg
    denT = np.broadcast_to(denom.transpose(0, 2, 1)[:, None, :, :], numer.shape)
    try:
        R = np.linalg.solve(denT, numer.transpose(0, 1, 3, 2)).transpose(0, 1, 3, 2)
    except np.linalg.LinAlgError:
        R = np.einsum("bgij,bjk->bgik", numer, np.linalg.pinv(denom, rcond=1e-12))
    N = Bg - np.einsum("bgij,bj->bgi", R, B1)
    eye = np.eye(p)
    ImR = eye[None, None, :, :] - R
    M = pi[None, :, None, None] * np.einsum("bgij,bgkj->bgik", ImR, ImR) + (1 - pi)[
        None, :, None, None
    ] * np.einsum("bgij,bgkj->bgik", R, R)
    return _batch_quad(M, N), chi


def simulate_critical_values(
    spec: LimitLawSpec,
    reps: int = 10000,
    n: int = 8000,
    seed=0,
    alphas=DEFAULT_ALPHAS,
) -> CriticalValueTable:
    """Tabulated upper quantiles of a simulated limit law.

    The default step count is deliberately finer than the path-simulation
    default: the supremum over a coarse grid is biased low (n = 1000 puts
    the 5% bridge quantile near 8.67 instead of 8.8), and quantiles are the
    one place that bias matters.
    """
    draws = simulate_limit_draws(spec, reps, n, seed)
    quantiles = tuple((a, float(np.quantile(draws, 1.0 - a))) for a in alphas)
    return CriticalValueTable(
        statistic=spec.kind,
        p=spec.p,
        window=(spec.window.pi1, spec.window.pi2),
        quantiles=quantiles,
        replications=reps,
        seed=seed if isinstance(seed, int) else 0,
        method="simulated-limit",
    )


def pc_diagnostic(c: float, pi_grid, reps: int = 10000, n: int = 1000, seed=0):
    """Mean and 95% band of the information-accumulation ratios.

    For each path of the reversion-c diffusion J, the instrumented ratio is
    (pi + int_0^pi J dJ) / (1 + int_0^1 J dJ) and the least-squares ratio is
    int_0^pi J^2 dJ / int_0^1 J^2 dJ; both are evaluated per draw on the
    requested pi grid.  Returns rows (estimator, pi, mean, lo95, hi95).
    """
    pi_grid = np.asarray(pi_grid, dtype=float)
    if ((pi_grid <= 0) | (pi_grid >= 1)).any():
        raise ValueError("pi grid must lie strictly inside (0, 1)")
    rng = np.random.default_rng(seed)
    jg = np.clip(np.rint(pi_grid * n).astype(int), 1, n)
    block = max(1, min(reps, int(4e6 / n)))
    s_ivx = np.empty((reps, len(pi_grid)))
    s_ols = np.empty((reps, len(pi_grid)))
    done = 0
    while done < reps:
        nb = min(block, reps - done)
        dW = rng.standard_normal((nb, n, 1)) / np.sqrt(n)
        J = _ou_panel(dW, c)[:, :, 0]
        dJ = J[:, 1:] - J[:, :-1]
        i1 = np.cumsum(J[:, :-1] * dJ, axis=1)
        i2 = np.cumsum(J[:, :-1] ** 2 * dJ, axis=1)
        s_ivx[done : done + nb] = (pi_grid[None, :] + i1[:, jg - 1]) / (1.0 + i1[:, -1][:, None])
        s_ols[done : done + nb] = i2[:, jg - 1] / i2[:, -1][:, None]
        done += nb
    rows = []
    for name, s in (("ivx", s_ivx), ("ols", s_ols)):
        mean = s.mean(axis=0)
        lo = np.quantile(s, 0.025, axis=0)
        hi = np.quantile(s, 0.975, axis=0)
        for i, pi in enumerate(pi_grid):
            rows.append(
                {"estimator": name, "pi": float(pi), "mean": float(mean[i]), "lo95": float(lo[i]), "hi95": float(hi[i])}
            )
    return rows
