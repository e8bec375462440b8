"""Kernel backend selection: compiled event loop when available, pure
Python otherwise.  Both backends are bit-identical by construction."""
from __future__ import annotations

from ._kernel_py import Frozen, KernelPy

try:
    from ._kernel_cy import KernelCy
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    KernelCy = None
    HAVE_COMPILED = False

DEFAULT_BACKEND = "cython" if HAVE_COMPILED else "python"


def make_kernel(occupations, d, rng, backend=None):
    """Build an event-loop kernel over a copy of the occupation vector."""
    backend = backend or DEFAULT_BACKEND
    if len(occupations) < 2:
        raise ValueError("need at least two sites")
    if backend == "python":
        return KernelPy(occupations, d, rng)
    if backend == "cython":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel not available in this build")
        return KernelCy(occupations, d, rng)
    raise ValueError(f"unknown backend {backend!r}")
