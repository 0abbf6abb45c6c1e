"""Command line entry point: ``pbpanel estimate`` and ``pbpanel simulate``.

Settings come from built-in defaults, then an optional ``--config`` file of
``key=value`` lines, then explicit flags (flags win).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import inference as inf
from .dgp import DgpConfig
from .io import config_hash, read_config, read_panel_csv, write_estimates_csv
from .montecarlo import CORRECTIONS, run_grid
from .panel import PanelError

ALL_ESTIMATORS = inf.ESTIMATORS

COMMON = {
    "estimator": "pb",
    "correction": "none",
    "bootstrap_reps": 999,
    "level": 0.05,
    "seed": 0,
    "output": "out",
    "leads": 1,
    "lags": 1,
    "bandwidth": "auto",
    "tol": 1e-4,
    "max_iter": 1000,
    "center": "bhat",
}
ESTIMATE_DEFAULTS = {**COMMON, "input": None, "order": 1, "epsilon": 2.0}
SIMULATE_DEFAULTS = {
    **COMMON,
    "bootstrap_reps": 0,
    "n": "20",
    "T": "20",
    "reps": 100,
    "csd": "off",
    "beta": 1.0,
    "alpha_range": "0.2,0.3",
    "rho_range": "0.3,0.7",
    "sigma2_range": "0.8,1.2",
    "burn_in": 100,
    "fix_loadings": "off",
    "null_beta": 1.0,
    "alt_beta": 0.9,
    "workers": 1,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value settings file; explicit flags override it")
    p.add_argument("--estimator", choices=[*ALL_ESTIMATORS, "all"])
    p.add_argument("--correction", choices=[*CORRECTIONS, "all"])
    p.add_argument("--bootstrap-reps", type=int, dest="bootstrap_reps")
    p.add_argument("--level", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--leads", type=int, help="PDOLS leads")
    p.add_argument("--lags", type=int, help="PDOLS lags")
    p.add_argument("--bandwidth", help="Bartlett bandwidth or 'auto'")
    p.add_argument("--tol", type=float, help="PMG convergence tolerance")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="PMG iteration cap")
    p.add_argument("--center", choices=["bhat", "zero"], help="bootstrap-t centering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbpanel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate long-run coefficients from a panel CSV")
    est.add_argument("--input", help="CSV with header unit,time,y,x1[,x2,...]")
    est.add_argument("--order", type=int, help="ARDL lag order for PB")
    est.add_argument("--epsilon", type=float, help="jackknife bias order")
    _add_common(est)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment")
    sim.add_argument("--n", help="cross-section size(s), comma separated")
    sim.add_argument("--T", help="time dimension(s), comma separated")
    sim.add_argument("--reps", type=int, help="Monte Carlo replications")
    sim.add_argument("--csd", choices=["on", "off"], help="factor-dependent errors")
    sim.add_argument("--beta", type=float)
    sim.add_argument("--alpha-range", dest="alpha_range", help="lo,hi")
    sim.add_argument("--rho-range", dest="rho_range", help="lo,hi")
    sim.add_argument("--sigma2-range", dest="sigma2_range", help="lo,hi")
    sim.add_argument("--burn-in", type=int, dest="burn_in")
    sim.add_argument("--fix-loadings", choices=["on", "off"], dest="fix_loadings")
    sim.add_argument("--null-beta", type=float, dest="null_beta")
    sim.add_argument("--alt-beta", type=float, dest="alt_beta")
    sim.add_argument("--workers", type=int)
    _add_common(sim)
    return parser


def resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults, the config file and explicit flags, coercing file values."""
    cfg = dict(defaults)
    if args.config:
        lookup = {k.lower(): k for k in defaults}
        for raw, value in read_config(args.config).items():
            key = lookup.get(raw)
            if key is None:
                raise SystemExit(f"unknown setting {raw!r} in {args.config}")
            base = defaults[key]
            cfg[key] = type(base)(value) if isinstance(base, (int, float)) else value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if not 0 < float(cfg["level"]) < 1:
        raise SystemExit("level must lie in (0, 1)")
    return cfg


def _pair(text: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in str(text).split(","))
    return lo, hi


def _ints(text) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _expand(value: str, allowed) -> tuple[str, ...]:
    return tuple(allowed) if value == "all" else (value,)


def _options(cfg: dict) -> inf.EstimatorOptions:
    bw = cfg["bandwidth"]
    return inf.EstimatorOptions(
        order=int(cfg.get("order", 1)), leads=int(cfg["leads"]), lags=int(cfg["lags"]),
        bandwidth=bw if bw == "auto" else int(bw), pmg_tol=float(cfg["tol"]),
        pmg_max_iter=int(cfg["max_iter"]))


def _sig4(v: float) -> str:
    return f"{v:.4g}"


def run_estimate(cfg: dict) -> str:
    """Estimate every requested estimator/correction pair and write ``estimates.csv``."""
    if not cfg["input"]:
        raise SystemExit("estimate needs --input")
    panel, names = read_panel_csv(cfg["input"], order=int(cfg["order"]))
    options = _options(cfg)
    level, seed, R_b = float(cfg["level"]), int(cfg["seed"]), int(cfg["bootstrap_reps"])
    estimators = _expand(cfg["estimator"], ALL_ESTIMATORS)
    corrections = _expand(cfg["correction"], CORRECTIONS)
    rows, table = [], []
    for slot, est in enumerate(estimators):
        try:
            plain = inf.uncorrected(panel, est, level, options)
            draws = None
            if R_b > 0 and any(c != "none" for c in corrections):
                draws = inf.sieve_wild_bootstrap(
                    panel, plain.beta_hat, est, R_b, seed + slot, options,
                    jackknife="jackknife" in corrections, epsilon=float(cfg["epsilon"]))
            for corr in corrections:
                if corr == "none":
                    res = plain
                elif corr == "bootstrap":
                    if draws is None:
                        raise SystemExit("bootstrap correction needs --bootstrap-reps >= 1")
                    res = inf.bootstrap_correct(panel, est, level=level, center=cfg["center"],
                                                options=options, draws=draws)
                else:
                    cv = None if draws is None else inf.bootstrap_critical_value(
                        draws, level, cfg["center"], jackknife=True)
                    res = inf.jackknife_correct(panel, est, float(cfg["epsilon"]), options,
                                                critical_value=cv, level=level)
                cells = []
                for j, name in enumerate(names):
                    rows.append({"estimator": est, "correction": corr, "coef": name,
                                 "estimate": float(res.beta_tilde[j]), "se": float(res.se[j]),
                                 "crit": float(res.critical_value[j]),
                                 "ci_lo": float(res.ci[j, 0]), "ci_hi": float(res.ci[j, 1])})
                    cells.append(f"{_sig4(res.beta_tilde[j])} [{_sig4(res.ci[j, 0])}, "
                                 f"{_sig4(res.ci[j, 1])}]")
                table.append((f"{est.upper()} ({corr})", cells))
        except PanelError as err:
            raise SystemExit(f"{est}: {err}") from err
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    write_estimates_csv(rows, out / "estimates.csv")
    pct = f"{100 * (1 - level):g}%"
    width = max(len(label) for label, _ in table)
    col = max(len(c) for _, cells in table for c in cells)
    lines = [" " * width + "  " + "  ".join(f"{n} ({pct} CI)".ljust(col) for n in names)]
    lines += [label.ljust(width) + "  " + "  ".join(c.ljust(col) for c in cells)
              for label, cells in table]
    lines += ["", f"n={panel.n}  T=[{panel.lengths.min()}..{panel.lengths.max()}]  "
              f"seed={seed}  config={config_hash(cfg)}"]
    report = "\n".join(lines)
    (out / "report.txt").write_text(report + "\n")
    return report


def run_simulate(cfg: dict) -> str:
    """Monte Carlo over the requested (n, T) grid; writes ``mc_summary.csv`` and ``mc_table.txt``."""
    base = DgpConfig(
        n=_ints(cfg["n"])[0], T=_ints(cfg["T"])[0], beta=float(cfg["beta"]),
        alpha_range=_pair(cfg["alpha_range"]), rho_range=_pair(cfg["rho_range"]),
        sigma2_y_range=_pair(cfg["sigma2_range"]), sigma2_x_range=_pair(cfg["sigma2_range"]),
        cross_sectional_dependence=cfg["csd"] == "on", burn_in=int(cfg["burn_in"]),
        fix_loadings=cfg["fix_loadings"] == "on", seed=int(cfg["seed"]))
    corrections = _expand(cfg["correction"], CORRECTIONS)
    R_b = int(cfg["bootstrap_reps"])
    if R_b < 1 and "bootstrap" in corrections:
        raise SystemExit("bootstrap correction needs --bootstrap-reps >= 1")
    summary = run_grid(
        base, _ints(cfg["n"]), _ints(cfg["T"]),
        estimators=_expand(cfg["estimator"], ALL_ESTIMATORS), corrections=corrections,
        R_mc=int(cfg["reps"]), R_b=R_b, null_beta=float(cfg["null_beta"]),
        alt_beta=float(cfg["alt_beta"]), level=float(cfg["level"]),
        workers=int(cfg["workers"]), options=_options(cfg), center=cfg["center"])
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out / "mc_summary.csv")
    # worker count does not affect results, so it is left out of the recorded hash
    recorded = {k: v for k, v in cfg.items() if k not in ("workers", "output", "config")}
    report = (summary.format_table() + "\n\n"
              + f"reps={cfg['reps']}  bootstrap_reps={R_b}  seed={cfg['seed']}  "
              + f"config={config_hash(recorded)}")
    (out / "mc_table.txt").write_text(report + "\n")
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(all="ignore")
    if args.command == "estimate":
        print(run_estimate(resolve(args, ESTIMATE_DEFAULTS)))
    else:
        print(run_simulate(resolve(args, SIMULATE_DEFAULTS)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
