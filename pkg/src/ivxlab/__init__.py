"""Predictive regressions with persistent regressors: instrumented estimation,
joint predictability and single-break Wald tests, simulated limit laws, wild
bootstrap critical values and a Monte Carlo harness."""

from .core import (
    BreakWindow,
    CriticalValueTable,
    FitResult,
    InnovationCov,
    IvxConfig,
    McExperiment,
    PersistenceSpec,
    Sample,
    TestReport,
    WaldScan,
)
from .dgp import DgpParams, draw_innovations, simulate_lur, simulate_sample
from .estimators import InstrumentSet, build_instruments, ivx_fit, ivz_intercept, ols_fit
from .longrun import LongRunEstimates, bartlett_lrcov, fm_correction, long_run_estimates
from .breaktests import (
    joint_wald_alpha_beta,
    joint_wald_beta,
    run_test,
    sup_wald_ivx_alpha,
    sup_wald_ivx_beta,
    sup_wald_ols,
    wald_ivx_alpha,
    wald_ivx_full,
)

__version__ = "0.1.0"

__all__ = [
    "BreakWindow",
    "CriticalValueTable",
    "DgpParams",
    "FitResult",
    "InnovationCov",
    "InstrumentSet",
    "IvxConfig",
    "LongRunEstimates",
    "McExperiment",
    "PersistenceSpec",
    "Sample",
    "TestReport",
    "WaldScan",
    "bartlett_lrcov",
    "build_instruments",
    "draw_innovations",
    "fm_correction",
    "ivx_fit",
    "ivz_intercept",
    "joint_wald_alpha_beta",
    "joint_wald_beta",
    "long_run_estimates",
    "ols_fit",
    "run_test",
    "simulate_lur",
    "simulate_sample",
    "sup_wald_ivx_alpha",
    "sup_wald_ivx_beta",
    "sup_wald_ols",
    "wald_ivx_alpha",
    "wald_ivx_full",
    "__version__",
]
