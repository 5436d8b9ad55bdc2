"""Hot block-family kernels with backend selection at import time.

The compiled Cython core (`heisenbath._fastkernels`) is used when it built
successfully; otherwise the NumPy fallback (`heisenbath._pykernels`) is
selected.  Set ``HEISENBATH_NO_EXT=1`` to force the fallback, e.g. for the
backend-equivalence tests and the benchmark.

The compiled loops beat BLAS dispatch overhead only while the matrices are
tiny; above a full-space side of ``_CUTOVER`` the BLAS route wins (see
``benchmarks/bench_blockops.py``), so each call dispatches on size.
"""

from __future__ import annotations

import os

import numpy as np

from . import _pykernels

_CUTOVER = 8  # full-space side d_S * d_B at/below which compiled loops win

if os.environ.get("HEISENBATH_NO_EXT"):
    _fast = None
else:
    try:
        from . import _fastkernels as _fast  # type: ignore[no-redef]
    except ImportError:
        _fast = None

BACKEND: str = "python" if _fast is None else "cython"

if _fast is None:
    fam_mul = _pykernels.fam_mul
    fam_commutator = _pykernels.fam_commutator
    kernel_stack_rhs = _pykernels.kernel_stack_rhs
else:

    def fam_mul(f, g):
        impl = _fast if f.shape[0] * f.shape[2] <= _CUTOVER else _pykernels
        return impl.fam_mul(f, g)

    def fam_commutator(h, o, scale):
        impl = _fast if h.shape[0] * h.shape[2] <= _CUTOVER else _pykernels
        return impl.fam_commutator(h, o, scale)

    def kernel_stack_rhs(hi_eig, omega, t, stack):
        impl = _fast if hi_eig.shape[0] * hi_eig.shape[2] <= _CUTOVER else _pykernels
        return impl.kernel_stack_rhs(hi_eig, omega, t, stack)


def identity_family(ds: int, db: int) -> np.ndarray:
    """The family of the full identity: ``1_S * delta_{ab}``."""
    out = np.zeros((db, db, ds, ds), dtype=complex)
    idx = np.arange(db)
    out[idx, idx] = np.eye(ds)
    return out
