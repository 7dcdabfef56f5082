"""Kernel backend selection.

The compiled extension is preferred when importable; the numpy fallback is
result-identical (same noise keys, same reduction trees, same expression
order).  Set ``LOCALSGD_KERNEL_BACKEND=numpy`` or ``=cython`` to force one,
e.g. for the backend benchmark.
"""

from __future__ import annotations

import os

_forced = os.environ.get("LOCALSGD_KERNEL_BACKEND")

if _forced == "numpy":
    from . import _kernels_py as _impl

    BACKEND = "numpy"
elif _forced == "cython":
    from . import _kernels as _impl  # noqa: F401  (raises if not built)

    BACKEND = "cython"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_py as _impl

        BACKEND = "numpy"

hinge_run = _impl.hinge_run
logistic_run = _impl.logistic_run
gradient_key_batch = _impl.gradient_key_batch


def load_backend(name: str):
    """Import a specific backend module (used by tests and the benchmark)."""
    if name == "numpy":
        from . import _kernels_py

        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
