"""Backend selection for the element kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``CCBM_STOKES_PURE_PYTHON`` is set to a non-empty
value other than ``0``) the NumPy implementation is used.
"""

import os

import numpy as np

from . import _kernels_py

_force_python = os.environ.get("CCBM_STOKES_PURE_PYTHON", "") not in ("", "0")

_compiled = None
if not _force_python:
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None for default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def p2p1_element_matrices(nodes, tris, grad_ref, val_ref, p1_ref, qw, backend=None):
    mod = get_backend(backend)
    return mod.p2p1_element_matrices(
        np.ascontiguousarray(nodes, dtype=float),
        np.ascontiguousarray(tris, dtype=np.int64),
        np.ascontiguousarray(grad_ref, dtype=float),
        np.ascontiguousarray(val_ref, dtype=float),
        np.ascontiguousarray(p1_ref, dtype=float),
        np.ascontiguousarray(qw, dtype=float),
    )


def p1_element_matrices(nodes, tris, backend=None):
    mod = get_backend(backend)
    return mod.p1_element_matrices(
        np.ascontiguousarray(nodes, dtype=float),
        np.ascontiguousarray(tris, dtype=np.int64),
    )
