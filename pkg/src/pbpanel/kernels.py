"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``PBPANEL_PURE_PYTHON`` is set to a non-empty value other
than ``0``) the numpy implementation is used.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("PBPANEL_PURE_PYTHON", "0") not in ("", "0"):
        raise ImportError("pure-Python backend requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _kernels_py

OK = _kernels_py.OK
SINGULAR_H = _kernels_py.SINGULAR_H
SINGULAR_INNER = _kernels_py.SINGULAR_INNER
TOO_SHORT = _kernels_py.TOO_SHORT


def bewley_project(y, X, offsets, order=1, rcond=1e-10, backend=None):
    impl = _impl if backend is None else get_backend(backend)
    return impl.bewley_project(
        np.ascontiguousarray(y, dtype=float),
        np.ascontiguousarray(X, dtype=float),
        np.ascontiguousarray(offsets, dtype=np.int64),
        int(order),
        float(rcond),
    )


def regenerate(y0, x0, offsets, c, alpha, beta, uy, ux, signs, sidx, backend=None):
    impl = _impl if backend is None else get_backend(backend)
    f = lambda v: np.ascontiguousarray(v, dtype=float)  # noqa: E731
    return impl.regenerate(
        f(y0), f(x0), np.ascontiguousarray(offsets, dtype=np.int64), f(c), f(alpha),
        f(beta), f(uy), f(ux), f(signs), np.ascontiguousarray(sidx, dtype=np.int64),
    )


def get_backend(name: str):
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])
