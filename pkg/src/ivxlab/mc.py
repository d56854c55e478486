"""Monte Carlo harness: empirical size and power over (c, T, rho) grids.

Each cell draws replications with seeds derived from the experiment's master
seed and the cell coordinates, so results are reproducible byte for byte and
independent of worker count or scheduling.  Emitted rows carry the rejection
frequency, its binomial standard error and full provenance.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bootstrap import wild_bootstrap_critical_value
from .breaktests import compute_statistic
from .core import BreakWindow, CriticalValueTable, InnovationCov, IvxConfig, McExperiment, PersistenceSpec
from .dgp import DgpParams, derive_seed, simulate_sample

TABLE1_RHOS = (-0.9, -0.7, -0.5, -0.3, 0.0, 0.3, 0.5, 0.7, 0.9)


def default_workers() -> int:
    env = os.environ.get("IVXLAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return os.cpu_count() or 1


def _unit_cov(rho: float) -> InnovationCov:
    return InnovationCov.from_correlation(rho)


def table2_cov(rho: float) -> InnovationCov:
    """Covariance [[0.25, s],[s, 0.75]] with correlation rho."""
    su, sv = 0.5, np.sqrt(0.75)
    return InnovationCov(0.25, [rho * su * sv], [[0.75]])


def _cell_params(exp: McExperiment, c: float, rho: float, cov_factory) -> DgpParams:
    pers = PersistenceSpec(np.full(exp.persistence.p, float(c)), exp.persistence.gamma_x)
    return DgpParams(
        theta1=exp.theta1,
        theta2=exp.theta2,
        break_fraction=exp.break_fraction,
        persistence=pers,
        innovations=cov_factory(rho),
        intercept=exp.intercept,
    )


def _run_chunk(exp, c, T, rho, rep_range, cv_source, cov_factory, boot_reps, boot_multiplier):
    params = _cell_params(exp, c, rho, cov_factory)
    fixed_cv = None
    if isinstance(cv_source, CriticalValueTable):
        fixed_cv = cv_source.cv(exp.level)
    elif cv_source != "bootstrap":
        fixed_cv = float(cv_source)
    rejections = 0
    for b in rep_range:
        seed = derive_seed(exp.seed, c, T, rho, b)
        sample = simulate_sample(params, T, seed)
        value, _ = compute_statistic(sample, exp.statistic, exp.window, exp.ivx)
        if fixed_cv is None:
            table = wild_bootstrap_critical_value(
                sample,
                exp.statistic,
                config=exp.ivx,
                window=exp.window,
                bootstrap_reps=boot_reps,
                alphas=(exp.level,),
                seed=derive_seed(exp.seed, c, T, rho, b, 0xB00),
                multiplier=boot_multiplier,
            )
            cv = table.cv(exp.level)
        else:
            cv = fixed_cv
        rejections += value > cv
    return rejections


def run_size_experiment(
    exp: McExperiment,
    cs,
    Ts,
    rhos,
    cv_source,
    cov_factory=_unit_cov,
    workers: int = None,
    bootstrap_reps: int = 399,
    bootstrap_multiplier: str = "normal",
):
    """Rejection frequencies of a null-imposed design over a (c, T, rho) grid.

    ``cv_source`` is a fixed critical value, a CriticalValueTable (looked up
    at the experiment's level) or the string 'bootstrap' for per-replication
    wild bootstrap critical values.  Needs theta1 = theta2 (the null).
    """
    t1, t2 = exp.theta1, exp.theta2
    if exp.break_fraction is not None and not (
        t1[0] == t2[0] and np.array_equal(np.atleast_1d(t1[1]), np.atleast_1d(t2[1]))
    ):
        raise ValueError("size experiment requires the null: theta1 == theta2")
    return _run_grid(exp, cs, Ts, rhos, cv_source, cov_factory, workers, bootstrap_reps, bootstrap_multiplier)


def run_power_experiment(
    exp: McExperiment,
    offset,
    cs,
    Ts,
    rhos,
    cv_source,
    break_fraction: float = 0.5,
    local: bool = False,
    cov_factory=_unit_cov,
    workers: int = None,
    bootstrap_reps: int = 399,
    bootstrap_multiplier: str = "normal",
):
    """Rejection frequencies under a parameter break of the given size.

    ``offset`` shifts (intercept, slopes) in regime 2; with ``local`` the
    shift is divided by each cell's T (a local alternative).  offset = 0
    reproduces the size experiment with identical seeds.
    """
    d_alpha, d_beta = offset
    d_beta = np.atleast_1d(np.asarray(d_beta, dtype=float))
    rows = []
    for T in np.atleast_1d(Ts):
        scale = 1.0 / T if local else 1.0
        theta2 = (exp.theta1[0] + d_alpha * scale, np.atleast_1d(exp.theta1[1]) + d_beta * scale)
        cell_exp = McExperiment(
            theta1=exp.theta1,
            theta2=theta2,
            break_fraction=break_fraction,
            persistence=exp.persistence,
            innovations=exp.innovations,
            T=int(T),
            replications=exp.replications,
            level=exp.level,
            statistic=exp.statistic,
            ivx=exp.ivx,
            window=exp.window,
            intercept=exp.intercept,
            seed=exp.seed,
        )
        rows.extend(
            _run_grid(cell_exp, cs, [int(T)], rhos, cv_source, cov_factory, workers, bootstrap_reps, bootstrap_multiplier)
        )
    return rows


def _run_grid(exp, cs, Ts, rhos, cv_source, cov_factory, workers, boot_reps, boot_multiplier):
    workers = workers or default_workers()
    cells = [(float(c), int(T), float(rho)) for c in np.atleast_1d(cs) for T in np.atleast_1d(Ts) for rho in np.atleast_1d(rhos)]
    B = exp.replications
    chunk = max(1, min(B, 500))
    tasks = []
    for ci, (c, T, rho) in enumerate(cells):
        for lo in range(0, B, chunk):
            tasks.append((ci, c, T, rho, range(lo, min(lo + chunk, B))))

    counts = np.zeros(len(cells), dtype=np.int64)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_chunk, exp, c, T, rho, rr, cv_source, cov_factory, boot_reps, boot_multiplier)
                for (ci, c, T, rho, rr) in tasks
            ]
            for (ci, *_rest), fut in zip(tasks, futures):
                counts[ci] += fut.result()
    else:
        for ci, c, T, rho, rr in tasks:
            counts[ci] += _run_chunk(exp, c, T, rho, rr, cv_source, cov_factory, boot_reps, boot_multiplier)

    if isinstance(cv_source, CriticalValueTable):
        cv_repr, source_name = cv_source.cv(exp.level), "table"
    elif cv_source == "bootstrap":
        cv_repr, source_name = float("nan"), "bootstrap"
    else:
        cv_repr, source_name = float(cv_source), "fixed"

    rows = []
    for ci, (c, T, rho) in enumerate(cells):
        rate = counts[ci] / B
        rows.append(
            {
                "statistic": exp.statistic,
                "c": c,
                "T": T,
                "rho": rho,
                "rejection_rate": float(rate),
                "stderr": float(np.sqrt(max(rate * (1 - rate), 1e-12) / B)),
                "B": B,
                "cv": cv_repr,
                "cv_source": source_name,
                "seed": exp.seed,
            }
        )
    return rows


def preset_experiment(name: str, fast: bool = False, seed: int = 20210125):
    """Built-in experiment designs mirroring the published size tables.

    Returns (experiment, cs, Ts, rhos, cv, cov_factory).
    """
    B = 500 if fast else 5000
    window = BreakWindow(0.15, 0.85)
    if name in ("table1", "table1a"):
        exp = McExperiment(
            theta1=(0.0, [0.25]),
            theta2=(0.0, [0.25]),
            break_fraction=None,
            persistence=PersistenceSpec([1.0], 1.0),
            innovations=_unit_cov(0.0),
            T=100,
            replications=B,
            level=0.05,
            statistic="sup-ols",
            ivx=IvxConfig(),
            window=window,
            intercept="none",
            seed=seed,
        )
        cs = (1.0, 5.0, 10.0, 20.0) if name == "table1" else (-1.0, -5.0, -10.0, -20.0)
        return exp, cs, (100, 250, 500, 1000), TABLE1_RHOS, 8.85, _unit_cov
    if name == "table2":
        exp = McExperiment(
            theta1=(0.25, [0.5]),
            theta2=(0.25, [0.5]),
            break_fraction=None,
            persistence=PersistenceSpec([1.0], 1.0),
            innovations=table2_cov(0.0),
            T=100,
            replications=B,
            level=0.05,
            statistic="sup-ivx-beta",
            ivx=IvxConfig(c_z=1.0, delta_z=0.75, fm_covariance=False, bias_correct=True),
            window=window,
            intercept="stable",
            seed=seed,
        )
        return exp, (1.0, 5.0), (100, 250, 500, 1000), TABLE1_RHOS, 13.42, table2_cov
    raise ValueError(f"unknown preset {name!r}; choose table1, table1a or table2")
