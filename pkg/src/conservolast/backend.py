"""Selects the accelerated kernel implementation.

Set CONSERVOLAST_BACKEND=numpy to force the pure-NumPy fallbacks, or
=numba to require the compiled kernels (ImportError if numba is
missing).  The default ("auto") uses numba when it imports cleanly.
CONSERVOLAST_THREADS caps the thread pools used for independent radius
candidates and stretch-direction groups (default 1: fully serial).
"""

from __future__ import annotations

import os

from . import _impl_numpy

_CHOICE = os.environ.get("CONSERVOLAST_BACKEND", "auto").lower()

if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(f"CONSERVOLAST_BACKEND must be auto|numba|numpy, got {_CHOICE!r}")

if _CHOICE == "numpy":
    _impl = _impl_numpy
else:
    try:
        from . import _impl_numba as _impl
    except ImportError:
        if _CHOICE == "numba":
            raise
        _impl = _impl_numpy


def backend_name() -> str:
    return "numba" if _impl is not _impl_numpy else "numpy"


def max_threads() -> int:
    raw = os.environ.get("CONSERVOLAST_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


rbf_parts = _impl.rbf_parts
model_eval_batch = _impl.model_eval_batch
design_blocks = _impl.design_blocks
fem_energy = _impl.fem_energy
fem_grad = _impl.fem_grad
fem_hess_vals = _impl.fem_hess_vals
fem_coupling = _impl.fem_coupling
