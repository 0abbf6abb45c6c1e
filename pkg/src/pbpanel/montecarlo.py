"""Monte Carlo experiments: bias, RMSE, size and power of corrected and plain estimators."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import inference as inf
from .dgp import DgpConfig, generate_panel
from .panel import PanelError

CORRECTIONS = ("none", "jackknife", "bootstrap")
SUMMARY_FIELDS = ("estimator", "correction", "n", "T", "bias", "rmse", "size", "power",
                  "reps", "failures")


@dataclass(frozen=True)
class McCell:
    estimator: str
    correction: str
    n: int
    T: int
    bias: float
    rmse: float
    size: float
    power: float
    reps: int
    failures: int

    def row(self) -> list:
        return [getattr(self, f) for f in SUMMARY_FIELDS]


@dataclass
class McSummary:
    cells: list[McCell] = field(default_factory=list)

    def __iter__(self):
        return iter(self.cells)

    def cell(self, estimator: str, correction: str = "none", n=None, T=None) -> McCell:
        for c in self.cells:
            if (c.estimator, c.correction) == (estimator, correction) and \
                    (n is None or c.n == n) and (T is None or c.T == T):
                return c
        raise KeyError((estimator, correction, n, T))

    def extend(self, other: "McSummary") -> "McSummary":
        self.cells.extend(other.cells)
        return self

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_FIELDS)
            for c in self.cells:
                w.writerow([_fmt(v) for v in c.row()])

    def format_table(self) -> str:
        """Text table with Bias x100, RMSE x100, Size and Power (percent) blocks.

        Each estimator/correction pair forms a panel of rows indexed by ``n``
        with one column per ``T`` in every block.
        """
        Ts = sorted({c.T for c in self.cells})
        ns = sorted({c.n for c in self.cells})
        pairs = list(dict.fromkeys((c.estimator, c.correction) for c in self.cells))
        blocks = (("Bias (x100)", "bias"), ("RMSE (x100)", "rmse"),
                  ("Size (5% level)", "size"), ("Power (5% level)", "power"))
        width = 8
        head = "n\\T".rjust(5) + "".join(
            "  " + title.center(width * len(Ts)) for title, _ in blocks)
        sub = " " * 5 + "".join("  " + "".join(str(T).rjust(width) for T in Ts) for _ in blocks)
        lines = [head, sub]
        index = {(c.estimator, c.correction, c.n, c.T): c for c in self.cells}
        for est, corr in pairs:
            lines.append(f"{est.upper()} ({corr})")
            for n in ns:
                parts = [str(n).rjust(5)]
                for _, attr in blocks:
                    vals = []
                    for T in Ts:
                        c = index.get((est, corr, n, T))
                        v = float("nan") if c is None else 100.0 * getattr(c, attr)
                        vals.append(_sig4(v).rjust(width))
                    parts.append("  " + "".join(vals))
                lines.append("".join(parts))
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _sig4(v: float) -> str:
    if math.isnan(v):
        return "-"
    return f"{v:.4g}"


def _seed_for(config: DgpConfig, rep: int, slot: int) -> int:
    ss = np.random.SeedSequence(config.seed, spawn_key=(rep, slot + 1))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def replicate(config: DgpConfig, rep: int, estimators, corrections, R_b: int, level: float,
              options: inf.EstimatorOptions | None = None, center="bhat") -> dict:
    """Estimates of one replication: ``{(estimator, correction): (beta, se, cv) or None}``.

    Only the first coefficient is kept. Bootstrap draws are shared by the
    bootstrap and jackknife corrections of the same estimator.
    """
    panel = generate_panel(config, rep)
    out = {}
    z = inf.normal_critical_value(level)
    for slot, est in enumerate(estimators):
        try:
            beta_hat, se = inf.fit(panel, est, options)
        except (PanelError, np.linalg.LinAlgError):
            for corr in corrections:
                out[(est, corr)] = None
            continue
        draws = None
        needs_draws = R_b > 0 and any(c != "none" for c in corrections)
        if needs_draws:
            try:
                draws = inf.sieve_wild_bootstrap(
                    panel, beta_hat, est, R_b, _seed_for(config, rep, slot), options,
                    jackknife="jackknife" in corrections)
            except (PanelError, np.linalg.LinAlgError):
                draws = None
        for corr in corrections:
            if corr == "none":
                out[(est, corr)] = (beta_hat[0], se[0], z)
            elif corr == "bootstrap":
                if draws is None:
                    out[(est, corr)] = None
                    continue
                cv = inf.order_statistic_quantile(
                    np.abs(inf.bootstrap_t(draws, center)), level)
                out[(est, corr)] = (beta_hat[0] - draws.b_hat[0], se[0], cv[0])
            elif corr == "jackknife":
                if needs_draws and draws is None:
                    out[(est, corr)] = None
                    continue
                try:
                    jb, js, _ = inf.jackknife_estimate(panel, est, inf.jackknife_kappa(2.0), options)
                except (PanelError, np.linalg.LinAlgError):
                    out[(est, corr)] = None
                    continue
                cv = z if draws is None else inf.order_statistic_quantile(
                    np.abs(inf.bootstrap_t(draws, center, jackknife=True)), level)[0]
                out[(est, corr)] = (jb[0], js[0], cv)
            else:
                raise ValueError(f"unknown correction {corr!r}")
    return out


def _replicate_chunk(args):
    config, reps, estimators, corrections, R_b, level, options, center = args
    return [replicate(config, r, estimators, corrections, R_b, level, options, center)
            for r in reps]


def summarize(results: list[dict], config: DgpConfig, estimators, corrections,
              null_beta: float, alt_beta: float) -> McSummary:
    cells = []
    for est in estimators:
        for corr in corrections:
            vals = [res[(est, corr)] for res in results if res[(est, corr)] is not None]
            fails = len(results) - len(vals)
            if vals:
                b, s, cv = (np.array(v) for v in zip(*vals))
                err = b - config.beta
                bias = float(err.mean())
                rmse = float(np.sqrt(np.mean(err**2)))
                size = float(np.mean(np.abs(b - null_beta) > cv * s))
                power = float(np.mean(np.abs(b - alt_beta) > cv * s))
            else:
                bias = rmse = size = power = float("nan")
            cells.append(McCell(est, corr, config.n, config.T, bias, rmse, size, power,
                                len(vals), fails))
    return McSummary(cells)


def run_experiment(config: DgpConfig, estimators=("pb",), corrections=("none",), R_mc: int = 100,
                   R_b: int = 0, null_beta: float = 1.0, alt_beta: float = 0.9,
                   level: float = 0.05, workers: int = 1,
                   options: inf.EstimatorOptions | None = None, center="bhat") -> McSummary:
    """Run ``R_mc`` replications of ``config`` and summarize every estimator/correction pair.

    Plain estimates are tested with the normal critical value; corrected ones
    with their bootstrap critical value (``R_b`` draws per replication; with
    ``R_b = 0`` the jackknife falls back to the normal value). Replication
    ``r`` depends only on ``(config.seed, r)``, so the summary is identical
    for any ``workers``.
    """
    if R_mc < 1:
        raise ValueError("R_mc must be at least 1")
    estimators = tuple(inf.check_estimator(e) for e in estimators)
    corrections = tuple(corrections)
    for c in corrections:
        if c not in CORRECTIONS:
            raise ValueError(f"unknown correction {c!r}")
    if "bootstrap" in corrections and R_b < 1:
        raise ValueError("bootstrap correction needs R_b >= 1")
    reps = list(range(R_mc))
    if workers <= 1:
        results = _replicate_chunk((config, reps, estimators, corrections, R_b, level,
                                    options, center))
    else:
        size = max(1, math.ceil(R_mc / (4 * workers)))
        chunks = [reps[i: i + size] for i in range(0, R_mc, size)]
        jobs = [(config, ch, estimators, corrections, R_b, level, options, center)
                for ch in chunks]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [res for part in pool.map(_replicate_chunk, jobs) for res in part]
    return summarize(results, config, estimators, corrections, null_beta, alt_beta)


def run_grid(base: DgpConfig, ns, Ts, **kwargs) -> McSummary:
    """:func:`run_experiment` over every ``(n, T)`` pair, in row-major order."""
    out = McSummary()
    for n in ns:
        for T in Ts:
            out.extend(run_experiment(replace(base, n=int(n), T=int(T)), **kwargs))
    return out
