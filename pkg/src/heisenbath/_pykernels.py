"""Pure-NumPy implementations of the hot block-family operations.

A family is stored as a contiguous complex array of shape
``(d_B, d_B, d_S, d_S)``; ``fam[a, b]`` is the system-space block carrying
bath indices ``(a, b)``.  These functions sit inside adaptive ODE
right-hand sides, so they avoid validation; callers guarantee contiguous
complex128 inputs of matching shape.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _as_full(fam: np.ndarray) -> np.ndarray:
    db, _, ds, _ = fam.shape
    return fam.transpose(2, 0, 3, 1).reshape(ds * db, ds * db)


def _as_family(full: np.ndarray, ds: int, db: int) -> np.ndarray:
    return np.ascontiguousarray(full.reshape(ds, db, ds, db).transpose(1, 3, 0, 2))


def fam_mul(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Blockwise product ``out[a,b] = sum_g f[a,g] @ g[g,b]``.

    Equals full-space matrix multiplication in the permuted layout, so a
    single BLAS call does the work.
    """
    db, _, ds, _ = f.shape
    return _as_family(_as_full(f) @ _as_full(g), ds, db)


def fam_commutator(h: np.ndarray, o: np.ndarray, scale: complex) -> np.ndarray:
    """``scale * (h o - o h)`` blockwise (the reduced Heisenberg RHS)."""
    db, _, ds, _ = h.shape
    hf = _as_full(h)
    of = _as_full(o)
    return _as_family(scale * (hf @ of - of @ hf), ds, db)


def kernel_stack_rhs(hi_eig: np.ndarray, omega: np.ndarray, t: float, stack: np.ndarray) -> np.ndarray:
    """RHS of the time-ordered kernel recurrence, in the H0 eigenbasis.

    ``hi_eig``/``omega`` define the interaction-picture Hamiltonian family
    ``h(t) = hi_eig * exp(-1j * omega * t)`` elementwise; the returned stack
    is ``d/dt K[n] = h(t) . K[n-1]`` with ``K[0]`` the identity family, so
    ``out[0] = h(t)`` and ``out[n] = h(t) . stack[n-1]``.
    """
    h = hi_eig * np.exp(-1j * omega * t)
    out = np.empty_like(stack)
    out[0] = h
    if stack.shape[0] > 1:
        db, _, ds, _ = h.shape
        hf = _as_full(h)
        for n in range(1, stack.shape[0]):
            out[n] = _as_family(hf @ _as_full(stack[n - 1]), ds, db)
    return out
