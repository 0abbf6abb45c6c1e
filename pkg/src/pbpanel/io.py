"""Panel CSV files, key=value run configuration, and result files."""

from __future__ import annotations

import csv
import hashlib
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .panel import PanelDataset, PanelError, UnitSeries

MISSING = frozenset({"", "na", "nan", "."})
ESTIMATE_FIELDS = ("estimator", "correction", "coef", "estimate", "se", "crit", "ci_lo", "ci_hi")


def read_panel_csv(path, order: int = 1):
    """``(panel, regressor_names)`` from a long-format CSV.

    The header must read ``unit,time,y,<x1>[,<x2>,...]``. Rows may come in
    any order; each unit is sorted by time and must cover consecutive
    integer periods. Empty, ``NA``, ``nan`` or ``.`` cells mark missing
    values: rows with missing values at the start or end of a unit are
    dropped, while missing values inside a unit are an error.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        if len(header) < 4 or [h.lower() for h in header[:3]] != ["unit", "time", "y"]:
            raise PanelError(f"{path}: header must start with unit,time,y and name at least "
                             f"one regressor, got {header}")
        names = header[3:]
        rows: OrderedDict[str, dict[int, tuple[int, list[float]]]] = OrderedDict()
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise PanelError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            unit = rec[0].strip()
            try:
                t = int(rec[1])
            except ValueError:
                raise PanelError(f"{path}:{lineno}: time {rec[1]!r} is not an integer") from None
            vals = []
            for col, cell in zip(header[2:], rec[2:]):
                if cell.strip().lower() in MISSING:
                    vals.append(np.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise PanelError(
                        f"{path}:{lineno}: column {col} value {cell!r} is not numeric") from None
            per_unit = rows.setdefault(unit, {})
            if t in per_unit:
                raise PanelError(f"{path}: duplicate (unit={unit}, time={t}) on lines "
                                 f"{per_unit[t][0]} and {lineno}")
            per_unit[t] = (lineno, vals)
    if not rows:
        raise PanelError(f"{path}: no data rows")
    units = []
    for unit, per_unit in rows.items():
        times = sorted(per_unit)
        gaps = [(a, b) for a, b in zip(times, times[1:]) if b != a + 1]
        if gaps:
            a, b = gaps[0]
            raise PanelError(f"{path}: unit {unit} is not contiguous (gap between time {a} and {b})")
        data = np.array([per_unit[t][1] for t in times])
        complete = np.flatnonzero(np.isfinite(data).all(axis=1))
        if complete.size == 0:
            raise PanelError(f"{path}: unit {unit} has no complete rows")
        lo, hi = complete[0], complete[-1] + 1
        inner = np.flatnonzero(~np.isfinite(data[lo:hi]).all(axis=1))
        if inner.size:
            raise PanelError(f"{path}: unit {unit} has missing values inside its sample "
                             f"(time {times[lo + inner[0]]})")
        data, times = data[lo:hi], times[lo:hi]
        units.append(UnitSeries(unit, data[:, 0], data[:, 1:], times[0]))
    return PanelDataset.from_units(units, order=order), names


def load_panel_csv(path, order: int = 1) -> PanelDataset:
    return read_panel_csv(path, order)[0]


def write_panel(panel: PanelDataset, path, names=None) -> None:
    """Write ``panel`` in the long format read by :func:`read_panel_csv`."""
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(panel.k)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "time", "y", *names])
        for u in panel.units:
            for s in range(u.T):
                w.writerow([u.unit_id, u.t0 + s, repr(float(u.y[s])),
                            *(repr(float(v)) for v in u.X[s])])


def read_config(path) -> dict:
    """``key=value`` lines; blank lines and ``#`` comments are skipped.

    Keys are normalized to lower case with dashes turned into underscores.
    """
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lower().replace("-", "_")] = value
    return out


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_estimates_csv(rows, path) -> None:
    """Rows are mappings with the keys of ``ESTIMATE_FIELDS``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATE_FIELDS)
        for r in rows:
            w.writerow([_cell(r[f]) for f in ESTIMATE_FIELDS])
