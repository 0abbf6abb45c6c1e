"""Panel data containers and the linear-algebra primitives shared by the estimators.

A panel is stored packed: the level series of all units are concatenated into
one outcome vector ``y`` and one regressor matrix ``X``, with ``offsets``
delimiting the units. This keeps bootstrap replicates cheap to build and lets
the compiled kernels walk the data without per-unit Python objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

RCOND = 1e-10


class PanelError(ValueError):
    """Invalid panel data or a failed per-unit computation."""


class SingularInstrumentsError(PanelError):
    """Instrument matrix or its inner product is numerically rank deficient."""

    def __init__(self, message: str, units: Sequence[str] = ()):
        super().__init__(message)
        self.units = tuple(units)


class PooledSingularityError(PanelError):
    """The pooled moment matrix of an estimator cannot be inverted."""


def min_length(k: int, order: int = 1) -> int:
    """Minimum number of level observations a unit needs.

    The instrument matrix has ``order + k*(order + 1)`` columns and demeaning
    removes one degree of freedom, so at least that many plus one effective
    rows are needed on top of the ``order`` observations lost to lagging.
    """
    return max(5, 2 * order + k * (order + 1) + 1)


@dataclass(frozen=True)
class UnitSeries:
    unit_id: str
    y: np.ndarray
    X: np.ndarray
    t0: int = 0

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        X = np.ascontiguousarray(X)
        if X.shape[0] != y.shape[0]:
            raise PanelError(
                f"unit {self.unit_id}: y has {y.shape[0]} rows but X has {X.shape[0]}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise PanelError(f"unit {self.unit_id}: missing or non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "t0", int(self.t0))

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.t0, self.t0 + self.T)


@dataclass(frozen=True)
class InstrumentSet:
    H_tilde: np.ndarray
    dZ_tilde: np.ndarray
    y_tilde: np.ndarray
    X_tilde: np.ndarray

    @property
    def T_eff(self) -> int:
        return self.y_tilde.shape[0]


class PanelDataset:
    """Immutable collection of units sharing the same regressor count.

    Build one with :meth:`from_units` (validated) or :meth:`from_arrays`.
    """

    __slots__ = ("y", "X", "offsets", "unit_ids", "t0")

    def __init__(self, y, X, offsets, unit_ids, t0):
        self.y = y
        self.X = X
        self.offsets = offsets
        self.unit_ids = tuple(unit_ids)
        self.t0 = t0
        for arr in (y, X, offsets, t0):
            arr.setflags(write=False)

    @classmethod
    def from_units(cls, units: Iterable[UnitSeries], order: int = 1) -> "PanelDataset":
        units = list(units)
        if not units:
            raise PanelError("panel has no units")
        k = units[0].k
        if k < 1:
            raise PanelError("at least one regressor is required")
        bad_k = [u.unit_id for u in units if u.k != k]
        if bad_k:
            raise PanelError(f"units with regressor count != {k}: {bad_k}")
        ids = [str(u.unit_id) for u in units]
        if len(set(ids)) != len(ids):
            raise PanelError("duplicate unit identifiers")
        need = min_length(k, order)
        short = [f"{u.unit_id} (T={u.T})" for u in units if u.T < need]
        if short:
            raise PanelError(f"units below the minimum length {need}: {', '.join(short)}")
        lengths = np.array([u.T for u in units], dtype=np.int64)
        offsets = np.zeros(len(units) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        y = np.concatenate([u.y for u in units])
        X = np.ascontiguousarray(np.concatenate([u.X for u in units], axis=0))
        t0 = np.array([u.t0 for u in units], dtype=np.int64)
        return cls(y, X, offsets, ids, t0)

    @classmethod
    def from_arrays(cls, y, X, t0=0, unit_ids=None, order: int = 1) -> "PanelDataset":
        """Balanced panel from ``y`` of shape (n, T) and ``X`` of shape (n, T, k)."""
        y = np.asarray(y, dtype=float)
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[:, :, None]
        n = y.shape[0]
        if unit_ids is None:
            unit_ids = [str(i + 1) for i in range(n)]
        return cls.from_units(
            (UnitSeries(unit_ids[i], y[i], X[i], t0) for i in range(n)), order=order
        )

    def _replace_data(self, y: np.ndarray, X: np.ndarray) -> "PanelDataset":
        # Same layout, new values; used for bootstrap replicates.
        return PanelDataset(y, X, self.offsets, self.unit_ids, self.t0)

    @property
    def n(self) -> int:
        return len(self.unit_ids)

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def balanced(self) -> bool:
        lengths = self.lengths
        return bool(np.all(lengths == lengths[0]) and np.all(self.t0 == self.t0[0]))

    def unit(self, i: int) -> UnitSeries:
        a, b = self.offsets[i], self.offsets[i + 1]
        return UnitSeries(self.unit_ids[i], self.y[a:b], self.X[a:b], int(self.t0[i]))

    @property
    def units(self) -> list[UnitSeries]:
        return [self.unit(i) for i in range(self.n)]

    def effective_lengths(self, order: int = 1) -> np.ndarray:
        return self.lengths - order

    def window(self, starts: np.ndarray, stops: np.ndarray) -> "PanelDataset":
        """Sub-panel keeping level rows ``starts[i]:stops[i]`` of every unit."""
        ys, Xs = [], []
        lengths = np.asarray(stops) - np.asarray(starts)
        for i in range(self.n):
            a = self.offsets[i]
            ys.append(self.y[a + starts[i]: a + stops[i]])
            Xs.append(self.X[a + starts[i]: a + stops[i]])
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        return PanelDataset(
            np.concatenate(ys),
            np.ascontiguousarray(np.concatenate(Xs, axis=0)),
            offsets,
            self.unit_ids,
            self.t0 + np.asarray(starts, dtype=np.int64),
        )

    def __repr__(self) -> str:
        return (
            f"PanelDataset(n={self.n}, k={self.k}, T=[{self.lengths.min()}..{self.lengths.max()}],"
            f" balanced={self.balanced})"
        )


def demean(v) -> np.ndarray:
    """Subtract the mean from a vector (or from each column of a matrix)."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] == 0:
        raise PanelError("cannot demean an empty vector")
    return v - v.mean(axis=0)


def lagged_design(y: np.ndarray, X: np.ndarray, order: int = 1):
    """Undemeaned Bewley design on the effective sample.

    Returns ``(H, dZ, W)`` where ``H`` holds the level instruments
    ``(y_{-1..-p}, X, X_{-1..-p})``, ``dZ`` the differenced regressors
    ``(dy, dX)`` and their lags up to ``p-1``, and ``W = (X, y)``, all on rows
    ``order .. T-1`` of the level data.
    """
    T = y.shape[0]
    k = X.shape[1]
    m = T - order
    rows = slice(order, T)
    h_cols = [y[order - j: T - j] for j in range(1, order + 1)]
    h_cols.append(X[rows])
    h_cols.extend(X[order - j: T - j] for j in range(1, order + 1))
    H = np.column_stack(h_cols)
    dy = np.diff(y)
    dX = np.diff(X, axis=0)
    d_cols = []
    for j in range(order):
        d_cols.append(dy[order - 1 - j: T - 1 - j])
        d_cols.append(dX[order - 1 - j: T - 1 - j])
    dZ = np.column_stack(d_cols)
    W = np.column_stack([X[rows], y[rows]])
    assert H.shape == (m, order + k * (order + 1)) and dZ.shape == (m, (k + 1) * order)
    return H, dZ, W


def build_instruments(unit: UnitSeries, order: int = 1) -> InstrumentSet:
    """Demeaned instruments and differenced regressors for one unit."""
    k = unit.k
    if unit.T - order < order + k * (order + 1) + 1:
        raise SingularInstrumentsError(
            f"unit {unit.unit_id}: {unit.T - order} effective rows cannot identify "
            f"{order + k * (order + 1)} instruments",
            [unit.unit_id],
        )
    H, dZ, W = lagged_design(unit.y, unit.X, order)
    Wt = demean(W)
    return InstrumentSet(
        H_tilde=demean(H), dZ_tilde=demean(dZ), y_tilde=Wt[:, k], X_tilde=Wt[:, :k]
    )


def _check_rank(A: np.ndarray, rcond: float, what: str, unit_id) -> None:
    if A.shape[1] == 0:
        return
    if A.shape[0] < A.shape[1]:
        raise SingularInstrumentsError(f"unit {unit_id}: {what} has more columns than rows", [unit_id])
    R = scipy.linalg.qr(A, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d[0] == 0.0 or d[-1] <= rcond * d[0]:
        raise SingularInstrumentsError(f"unit {unit_id}: {what} is rank deficient", [unit_id])


def projection(H_tilde, unit_id="?", rcond: float = RCOND) -> np.ndarray:
    """Orthogonal projector onto the column space of ``H_tilde``."""
    H = np.asarray(H_tilde, dtype=float)
    if H.ndim == 1:
        H = H[:, None]
    _check_rank(H, rcond, "instrument matrix", unit_id)
    return H @ np.linalg.solve(H.T @ H, H.T)


def annihilator(P, dZ_tilde, unit_id="?", rcond: float = RCOND) -> np.ndarray:
    """``P - P dZ (dZ' P dZ)^{-1} dZ' P``: removes the differenced regressors from ``P``."""
    P = np.asarray(P, dtype=float)
    dZ = np.asarray(dZ_tilde, dtype=float)
    if dZ.ndim == 1:
        dZ = dZ[:, None]
    PdZ = P @ dZ
    inner = dZ.T @ PdZ
    if 1.0 / np.linalg.cond(inner) < rcond:
        raise SingularInstrumentsError(
            f"unit {unit_id}: projected differenced regressors are singular", [unit_id]
        )
    return P - PdZ @ np.linalg.solve(inner, PdZ.T)
