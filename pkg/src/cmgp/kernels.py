"""Backend selection for the batched program interpreter.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over. Set ``CMGP_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("CMGP_PURE_PYTHON"):
        raise ImportError("compiled kernel disabled by CMGP_PURE_PYTHON")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "numpy"


def _impl(backend):
    if backend is None:
        backend = BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.run_population
    if backend == "numpy":
        return _kernels_py.run_population
    raise ValueError(f"unknown backend {backend!r}")


def run_population(genomes, states, offsets, negate, backend=None):
    """Dispatch to the selected backend; see ``_kernels_py.run_population``."""
    genomes = np.ascontiguousarray(genomes, dtype=np.float64)
    states = np.ascontiguousarray(states, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.float64)
    negate = np.ascontiguousarray(negate).view(np.uint8) if negate.dtype == np.bool_ \
        else np.ascontiguousarray(negate, dtype=np.uint8)
    if genomes.ndim != 2 or states.ndim != 2:
        raise ValueError("genomes and states must be 2-D")
    expected = (genomes.shape[0], states.shape[0], offsets.shape[2], genomes.shape[1])
    if offsets.shape != expected or negate.shape != expected:
        raise ValueError(f"noise arrays must have shape {expected}")
    return _impl(backend)(genomes, states, offsets, negate)
