"""Backend selection for the inner loops.

The Cython extension is used when it was built; otherwise, or when the
environment variable ``SKILLSPACE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python versions are used.
"""

import os

import numpy as np

from . import _pykernels

_force_python = os.environ.get("SKILLSPACE_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def orthomax_sweeps(loadings, gamma, tol, max_sweeps, backend=None):
    """Run pairwise orthomax sweeps on a copy of ``loadings``.

    Returns ``(rotated, rotation, n_sweeps, converged)`` with
    ``rotated == loadings @ rotation``.
    """
    impl = _pick(backend)
    work = np.array(loadings, dtype=float, order="C", copy=True)
    rot, n_sweeps, converged = impl.orthomax_sweeps(work, float(gamma), float(tol), int(max_sweeps))
    return work, np.asarray(rot), int(n_sweeps), bool(converged)


def maxmin_order(points, start, k, backend=None):
    impl = _pick(backend)
    pts = np.ascontiguousarray(points, dtype=float)
    return np.asarray(impl.maxmin_order(pts, int(start), int(k)), dtype=int)


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")
