"""Command-line surface: data ingestion, tests, critical values, Monte Carlo.

Subcommands: estimate, test, simulate-cv, bootstrap-cv, mc-size, mc-power,
pc-diagnostic.  Every run is deterministic given --seed; artifacts are CSV
files plus a .meta.json sidecar embedding seed, version and the resolved
configuration.  Exit codes: 0 success, 2 usage error, 1 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np
from scipy import stats as sstats

from . import __version__, asymptotics, breaktests, mc
from .bootstrap import wild_bootstrap_critical_value
from .core import BreakWindow, IvxConfig, Sample
from .estimators import ivx_fit, ols_fit
from .longrun import bartlett_lrcov

NA_STRINGS = {"", "NA", "NaN", "nan", "na", "N/A"}


# ---------------------------------------------------------------------------
# ingestion


def ingest_predictor_csv(path, y=None, x=(), returns=None, riskfree=None, intercept="stable"):
    """Load a Sample from a headered CSV.

    Either ``y`` names the response column, or ``returns`` and ``riskfree``
    name a pair whose difference (the premium) becomes the response.  The
    regressor columns are lagged one row internally, so T = usable rows - 1.
    Rows with any missing mapped field are dropped and counted.

    Returns (sample, report) with report = {rows_read, rows_dropped, T}.
    """
    x = list(x)
    if not x:
        raise ValueError("need at least one regressor column")
    premium = returns is not None or riskfree is not None
    if premium and (returns is None or riskfree is None):
        raise ValueError("premium mode needs both the return and risk-free columns")
    if not premium and y is None:
        raise ValueError("need a response column (or a return/risk-free pair)")
    need = ([returns, riskfree] if premium else [y]) + x

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in need if c not in header]
        if missing:
            raise ValueError(f"unknown column names: {missing}; file has {header}")
        rows_read = 0
        dropped = 0
        kept = []
        for row in reader:
            rows_read += 1
            vals = []
            ok = True
            for c in need:
                cell = (row[c] or "").strip()
                if cell in NA_STRINGS:
                    ok = False
                    break
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(f"non-numeric cell {row[c]!r} in column {c!r}")
            if ok:
                kept.append(vals)
            else:
                dropped += 1

    data = np.asarray(kept, dtype=float)
    if premium:
        resp = data[:, 0] - data[:, 1]
        regs = data[:, 2:]
    else:
        resp = data[:, 0]
        regs = data[:, 1:]
    # row t of the design holds x_{t-1}
    y_vec = resp[1:]
    X = regs[:-1] if len(regs) else regs
    p = len(x)
    if len(y_vec) < 4 * (p + 1):
        raise ValueError(
            f"too few usable observations: T={len(y_vec)} after lagging, need at least 4(p+1)={4 * (p + 1)}"
        )
    sample = Sample(y_vec, X, intercept=intercept)
    return sample, {"rows_read": rows_read, "rows_dropped": dropped, "T": sample.T}


def hac_ols_summary(sample: Sample, m: int = None, eta: float = 1.0):
    """Full-sample least squares with kernel-robust t ratios and R squared."""
    T = sample.T
    if m is None:
        m = int(np.floor(eta * T**0.2))
    fit = ols_fit(sample)
    if sample.intercept == "none":
        W = sample.X
    else:
        W = np.column_stack([np.ones(T), sample.X])
    G = W.T @ W
    score = W * np.asarray(fit.residuals)[:, None]
    S = T * bartlett_lrcov(score, score, m, two_sided=True)
    Gi = np.linalg.pinv(G)
    V = Gi @ S @ Gi
    theta = np.concatenate([[fit.alpha], fit.beta]) if fit.alpha is not None else fit.beta
    se = np.sqrt(np.maximum(np.diag(V), 0.0))
    tstat = np.divide(theta, se, out=np.zeros_like(theta), where=se > 0)
    denom = ((sample.y - sample.y.mean()) ** 2).sum() if sample.intercept != "none" else (sample.y**2).sum()
    ssr = float(np.asarray(fit.residuals) @ np.asarray(fit.residuals))
    r2 = 1.0 - ssr / denom if denom > 0 else 0.0
    off = 1 if fit.alpha is not None else 0
    return {
        "beta": fit.beta,
        "alpha": fit.alpha,
        "t_hac": tstat[off:],
        "se_hac": se[off:],
        "r2": float(r2),
        "hac_lags": m,
    }


# ---------------------------------------------------------------------------
# artifact helpers


def _write_csv(path, rows, fieldnames):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for r in rows:
            writer.writerow(r)


def _write_meta(path, args, extra=None):
    meta = {"version": __version__, "command": " ".join(sys.argv[1:]), "config": _jsonable(vars(args))}
    if extra:
        meta.update(extra)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, default=str)


def _jsonable(d):
    return {k: (v if isinstance(v, (int, float, str, bool, type(None))) else str(v)) for k, v in d.items()}


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# shared option groups


def _add_data_args(p):
    p.add_argument("--csv", required=True, help="input CSV with a header row")
    p.add_argument("--y", help="response column")
    p.add_argument("--x", required=True, help="comma list of regressor columns")
    p.add_argument("--return", dest="returns", help="total-return column (premium mode)")
    p.add_argument("--riskfree", help="risk-free column (premium mode)")
    p.add_argument("--intercept", default="stable", choices=["none", "stable", "unstable"])


def _add_ivx_args(p):
    p.add_argument("--ivx-cz", type=float, default=1.0)
    p.add_argument("--ivx-delta", type=float, default=0.95)
    p.add_argument("--bandwidth-eta", type=float, default=1.0)
    p.add_argument("--bias-correct", action="store_true")
    p.add_argument("--plain-covariance", action="store_true", help="plain sandwich instead of the FM form")


def _add_window_args(p):
    p.add_argument("--window", default="0.15,0.85", help="trimming window 'pi1,pi2'")


def _ivx_config(args) -> IvxConfig:
    return IvxConfig(
        c_z=args.ivx_cz,
        delta_z=args.ivx_delta,
        bandwidth_eta=args.bandwidth_eta,
        bias_correct=args.bias_correct,
        fm_covariance=not args.plain_covariance,
    )


def _window(args) -> BreakWindow:
    a, b = (float(v) for v in args.window.split(","))
    return BreakWindow(a, b)


def _sample_from_args(args) -> tuple:
    xcols = [c.strip() for c in args.x.split(",") if c.strip()]
    return ingest_predictor_csv(
        args.csv, y=args.y, x=xcols, returns=args.returns, riskfree=args.riskfree, intercept=args.intercept
    )


# ---------------------------------------------------------------------------
# subcommands


def _cmd_estimate(args):
    sample, report = _sample_from_args(args)
    config = _ivx_config(args)
    xcols = [c.strip() for c in args.x.split(",") if c.strip()]
    rows = []
    if args.univariate and sample.p > 1:
        for i, name in enumerate(xcols):
            sub = Sample(sample.y, sample.X[:, i : i + 1], intercept=sample.intercept)
            rows.append(_estimate_row(name, sub, config, args))
    else:
        rows.append(_estimate_row(",".join(xcols), sample, config, args))
    out = _outdir(args)
    path = os.path.join(out, "estimates.csv")
    _write_csv(path, rows, list(rows[0].keys()))
    _write_meta(path.replace(".csv", ".meta.json"), args, {"ingestion": report})
    for r in rows:
        print(
            f"estimate [{r['predictor']}]: beta_ols={r['beta_ols']:+.4f} t_hac={r['t_hac']:+.4f} "
            f"r2={r['r2']:.4f} beta_ivx={r['beta_ivx']:+.4f} wald_ivx={r['wald_ivx']:.4f}"
        )
    return 0


def _estimate_row(name, sample, config, args):
    ols = hac_ols_summary(sample, m=args.hac_lags, eta=args.bandwidth_eta)
    fit = ivx_fit(sample, config=config)
    wald = breaktests.wald_ivx_full(sample, config)
    return {
        "predictor": name,
        "beta_ols": float(ols["beta"][0]) if sample.p == 1 else float(ols["beta"][0]),
        "t_hac": float(ols["t_hac"][0]),
        "r2": ols["r2"],
        "beta_ivx": float(fit.beta[0]),
        "wald_ivx": float(wald),
        "T": sample.T,
        "hac_lags": ols["hac_lags"],
    }


_LAW_FOR_STAT = {
    "sup-ols": ("sup-nbb", lambda p: p),
    "sup-ivx-beta": ("sup-nbb", lambda p: p),
    "sup-ivx-alpha": ("sup-nbb", lambda p: 1),
    "joint-beta": ("joint-cor2", lambda p: p),
    "joint-alpha-beta": ("joint-prop2", lambda p: p),
}


def _default_cv(statistic, sample, window, args):
    """Critical value when none is given: chi-square for the full-sample
    test, a simulated limit law otherwise."""
    if statistic == "ivx":
        return float(sstats.chi2.ppf(1 - args.alpha, df=sample.p)), "chi2"
    law, pdim = _LAW_FOR_STAT[statistic]
    spec = asymptotics.LimitLawSpec(law, pdim(sample.p), window, gamma_class=args.gamma_class, c=args.c_limit)
    table = asymptotics.simulate_critical_values(spec, reps=args.cv_reps, n=args.steps, seed=args.seed, alphas=(args.alpha,))
    return table.cv(args.alpha), f"simulated:{law}"


def _cmd_test(args):
    sample, report = _sample_from_args(args)
    config = _ivx_config(args)
    window = _window(args)
    if args.cv is not None:
        cv, source = args.cv, "fixed"
    elif args.bootstrap_cv:
        table = wild_bootstrap_critical_value(
            sample, args.stat, config=config, window=window, bootstrap_reps=args.breps, alphas=(args.alpha,), seed=args.seed
        )
        cv, source = table.cv(args.alpha), "bootstrap"
    else:
        cv, source = _default_cv(args.stat, sample, window, args)
    rep = breaktests.run_test(sample, args.stat, cv, args.alpha, window, config)
    out = _outdir(args)
    path = os.path.join(out, "test_report.csv")
    row = {
        "statistic": rep.statistic,
        "value": rep.value,
        "cv": rep.critical_value,
        "alpha": rep.alpha,
        "decision": "reject" if rep.reject else "fail-to-reject",
        "break_fraction": rep.break_fraction if rep.break_fraction is not None else "",
        "cv_source": source,
    }
    _write_csv(path, [row], list(row.keys()))
    _write_meta(path.replace(".csv", ".meta.json"), args, {"ingestion": report})
    frac = f" break@{rep.break_fraction:.3f}" if rep.break_fraction is not None else ""
    print(f"test {rep.statistic}: value={rep.value:.4f} cv={cv:.4f} ({source}) -> {row['decision']}{frac}")
    return 0


def _cmd_simulate_cv(args):
    window = _window(args)
    alphas = tuple(float(a) for a in args.alpha_list.split(","))
    spec = asymptotics.LimitLawSpec(
        args.law, args.p, window, gamma_class=args.gamma_class, c=args.c_limit, rho=args.rho, intercept=args.with_intercept
    )
    table = asymptotics.simulate_critical_values(spec, reps=args.reps, n=args.steps, seed=args.seed, alphas=alphas)
    rows = [
        {"statistic": table.statistic, "p": table.p, "pi1": window.pi1, "pi2": window.pi2,
         "alpha": a, "cv": c, "reps": table.replications, "steps": args.steps, "seed": args.seed,
         "method": table.method}
        for a, c in table.quantiles
    ]
    out = _outdir(args)
    path = os.path.join(out, "critical_values.csv")
    _write_csv(path, rows, list(rows[0].keys()))
    _write_meta(path.replace(".csv", ".meta.json"), args)
    for r in rows:
        print(f"simulate-cv {args.law} p={args.p}: alpha={r['alpha']} cv={r['cv']:.4f}")
    return 0


def _cmd_bootstrap_cv(args):
    sample, report = _sample_from_args(args)
    config = _ivx_config(args)
    window = _window(args)
    alphas = tuple(float(a) for a in args.alpha_list.split(","))
    table = wild_bootstrap_critical_value(
        sample, args.stat, config=config, window=window, bootstrap_reps=args.breps,
        alphas=alphas, seed=args.seed, multiplier=args.multiplier,
    )
    rows = [
        {"statistic": table.statistic, "p": table.p, "pi1": window.pi1, "pi2": window.pi2,
         "alpha": a, "cv": c, "reps": table.replications, "seed": args.seed, "method": "bootstrap"}
        for a, c in table.quantiles
    ]
    out = _outdir(args)
    path = os.path.join(out, "bootstrap_cv.csv")
    _write_csv(path, rows, list(rows[0].keys()))
    _write_meta(path.replace(".csv", ".meta.json"), args, {"ingestion": report})
    for r in rows:
        print(f"bootstrap-cv {args.stat}: alpha={r['alpha']} cv={r['cv']:.4f}")
    return 0


def _mc_rows_to_disk(rows, args, name):
    out = _outdir(args)
    path = os.path.join(out, name)
    _write_csv(path, rows, ["statistic", "c", "T", "rho", "rejection_rate", "stderr", "B", "cv", "cv_source", "seed"])
    _write_meta(path.replace(".csv", ".meta.json"), args)
    return path


def _cmd_mc_size(args):
    exp, cs, Ts, rhos, cv, covf = mc.preset_experiment(args.preset, fast=args.fast, seed=args.seed)
    if args.c_list:
        cs = tuple(float(v) for v in args.c_list.split(","))
    if args.T_list:
        Ts = tuple(int(v) for v in args.T_list.split(","))
    if args.rho_list:
        rhos = tuple(float(v) for v in args.rho_list.split(","))
    if args.cv is not None:
        cv = args.cv
    source = "bootstrap" if args.bootstrap_cv else cv
    rows = mc.run_size_experiment(exp, cs, Ts, rhos, source, cov_factory=covf, workers=args.workers,
                                  bootstrap_reps=args.breps)
    path = _mc_rows_to_disk(rows, args, f"mc_size_{args.preset}.csv")
    print(f"mc-size {args.preset}: {len(rows)} cells -> {path}")
    return 0


def _cmd_mc_power(args):
    exp, cs, Ts, rhos, cv, covf = mc.preset_experiment(args.preset, fast=args.fast, seed=args.seed)
    if args.c_list:
        cs = tuple(float(v) for v in args.c_list.split(","))
    if args.T_list:
        Ts = tuple(int(v) for v in args.T_list.split(","))
    if args.rho_list:
        rhos = tuple(float(v) for v in args.rho_list.split(","))
    if args.cv is not None:
        cv = args.cv
    offset = (args.offset_alpha, [float(v) for v in args.offset_beta.split(",")])
    source = "bootstrap" if args.bootstrap_cv else cv
    rows = mc.run_power_experiment(exp, offset, cs, Ts, rhos, source, break_fraction=args.break_frac,
                                   local=args.local, cov_factory=covf, workers=args.workers,
                                   bootstrap_reps=args.breps)
    path = _mc_rows_to_disk(rows, args, f"mc_power_{args.preset}.csv")
    print(f"mc-power {args.preset}: {len(rows)} cells -> {path}")
    return 0


def _cmd_pc_diagnostic(args):
    lo, hi, num = args.pi_grid.split(",")
    grid = np.linspace(float(lo), float(hi), int(num))
    rows = asymptotics.pc_diagnostic(args.c_limit, grid, reps=args.reps, n=args.steps, seed=args.seed)
    out = _outdir(args)
    path = os.path.join(out, "pc_diagnostic.csv")
    _write_csv(path, rows, ["estimator", "pi", "mean", "lo95", "hi95"])
    _write_meta(path.replace(".csv", ".meta.json"), args)
    print(f"pc-diagnostic c={args.c_limit}: {len(rows)} rows -> {path}")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ivxlab", description=__doc__)
    ap.add_argument("--config", help="flat key-value JSON file mirroring the flags; flags override")
    sub = ap.add_subparsers(dest="command", required=True)

    pe = sub.add_parser("estimate", help="full-sample OLS/IVX estimates with robust t ratios")
    _add_data_args(pe)
    _add_ivx_args(pe)
    pe.add_argument("--univariate", action="store_true", help="one univariate regression per listed predictor")
    pe.add_argument("--hac-lags", type=int, default=None)
    pe.set_defaults(func=_cmd_estimate)

    pt = sub.add_parser("test", help="run one predictability/break statistic on CSV data")
    _add_data_args(pt)
    _add_ivx_args(pt)
    _add_window_args(pt)
    pt.add_argument("--stat", required=True, choices=list(breaktests.STATISTICS))
    pt.add_argument("--alpha", type=float, default=0.05)
    pt.add_argument("--cv", type=float, default=None, help="fixed critical value override")
    pt.add_argument("--bootstrap-cv", action="store_true")
    pt.add_argument("--breps", type=int, default=399)
    pt.add_argument("--cv-reps", type=int, default=2000)
    pt.add_argument("--steps", type=int, default=2000)
    pt.add_argument("--gamma-class", default="sub", choices=list(asymptotics.GAMMA_CLASSES))
    pt.add_argument("--c-limit", type=float, default=1.0)
    pt.set_defaults(func=_cmd_test)

    ps = sub.add_parser("simulate-cv", help="tabulate critical values of a simulated limit law")
    ps.add_argument("--law", required=True, choices=list(asymptotics.LAWS))
    ps.add_argument("--p", type=int, default=1)
    _add_window_args(ps)
    ps.add_argument("--alpha", dest="alpha_list", default="0.10,0.05,0.025,0.01", help="comma list")
    ps.add_argument("--reps", type=int, default=10000)
    ps.add_argument("--steps", type=int, default=8000)
    ps.add_argument("--gamma-class", default="sub", choices=list(asymptotics.GAMMA_CLASSES))
    ps.add_argument("--c-limit", type=float, default=1.0)
    ps.add_argument("--rho", type=float, default=0.0)
    ps.add_argument("--with-intercept", action="store_true")
    ps.set_defaults(func=_cmd_simulate_cv)

    pb = sub.add_parser("bootstrap-cv", help="wild bootstrap critical values on CSV data")
    _add_data_args(pb)
    _add_ivx_args(pb)
    _add_window_args(pb)
    pb.add_argument("--stat", required=True, choices=list(breaktests.STATISTICS))
    pb.add_argument("--alpha", dest="alpha_list", default="0.05")
    pb.add_argument("--breps", type=int, default=999)
    pb.add_argument("--multiplier", default="normal", choices=["normal", "rademacher"])
    pb.set_defaults(func=_cmd_bootstrap_cv)

    for name, fn in (("mc-size", _cmd_mc_size), ("mc-power", _cmd_mc_power)):
        pm = sub.add_parser(name, help=f"{name} experiment over a (c, T, rho) grid")
        pm.add_argument("--preset", default="table1", choices=["table1", "table1a", "table2"])
        pm.add_argument("--fast", action="store_true", help="B=500 instead of 5000")
        pm.add_argument("--c", dest="c_list", default="", help="override comma list of c values")
        pm.add_argument("--T", dest="T_list", default="", help="override comma list of sample sizes")
        pm.add_argument("--rho", dest="rho_list", default="", help="override comma list of correlations")
        pm.add_argument("--cv", type=float, default=None)
        pm.add_argument("--bootstrap-cv", action="store_true")
        pm.add_argument("--breps", type=int, default=399)
        pm.add_argument("--workers", type=int, default=None)
        if name == "mc-power":
            pm.add_argument("--offset-alpha", type=float, default=0.0)
            pm.add_argument("--offset-beta", default="1.0", help="comma list, slope shift in regime 2")
            pm.add_argument("--break-frac", type=float, default=0.5)
            pm.add_argument("--local", action="store_true", help="divide offsets by T")
        pm.set_defaults(func=fn)

    pp = sub.add_parser("pc-diagnostic", help="information-accumulation ratio curves")
    pp.add_argument("--c-limit", "--c", dest="c_limit", type=float, default=1.0)
    pp.add_argument("--pi-grid", default="0.05,0.95,19", help="'lo,hi,points'")
    pp.add_argument("--reps", type=int, default=10000)
    pp.add_argument("--steps", type=int, default=1000)
    pp.set_defaults(func=_cmd_pc_diagnostic)

    for p in (pe, pt, ps, pb, pp) + tuple(sub.choices[n] for n in ("mc-size", "mc-power")):
        p.add_argument("--out", default=".", help="artifact directory")
        p.add_argument("--seed", type=int, default=0)
    return ap


def _apply_config_file(ap, argv):
    """Config file values become parser defaults; explicit flags override."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    with open(path) as fh:
        cfg = json.load(fh)
    for action in ap._subparsers._group_actions[0].choices.values():
        defaults = {}
        for key, val in cfg.items():
            dest = key.replace("-", "_")
            if any(a.dest == dest for a in action._actions):
                defaults[dest] = val
        action.set_defaults(**defaults)
    return argv[:i] + argv[i + 2 :]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config_file(ap, argv)
    except (OSError, json.JSONDecodeError, IndexError) as exc:
        print(f"ivxlab: bad --config: {exc}", file=sys.stderr)
        return 2
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"ivxlab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
