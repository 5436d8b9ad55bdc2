"""Exact brute-force reference dynamics.

Everything here is computed by full-space eigendecomposition, with no
approximation of any kind: these functions are the ground truth that every
perturbative module is tested against.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DimensionError, IndexOutOfRange
from .model import ModelSpec
from .spaces import (
    DensityMatrix,
    OperatorMatrix,
    Space,
    full_operator,
    system_operator,
    weighted_bath_trace,
)


def total_hamiltonian(m: ModelSpec) -> OperatorMatrix:
    """``H0 (x) 1 + 1 (x) H_B + lambda * H_I`` on the full space."""
    d_s, d_b = m.dim_system, m.dim_bath
    mat = (
        np.kron(m.h0.mat, np.eye(d_b))
        + np.kron(np.eye(d_s), m.hb.mat)
        + m.constants.lam * m.hi.mat
    )
    return full_operator(mat, m.hi.tag)


def heisenberg_evolve_exact(m: ModelSpec, o0: OperatorMatrix, t: float) -> OperatorMatrix:
    """Heisenberg-evolved ``exp(+iHt/hbar) (o0 (x) 1_B) exp(-iHt/hbar)``."""
    if o0.tag.kind is not Space.SYSTEM:
        raise DimensionError("initial observable must live on the system space")
    h = total_hamiltonian(m)
    h.require_hermitian("total Hamiltonian")
    evals, vecs = np.linalg.eigh(h.mat)
    u = (vecs * np.exp(-1j * evals * t / m.constants.hbar)) @ vecs.conj().T
    full0 = np.kron(o0.mat, np.eye(m.dim_bath))
    return full_operator(u.conj().T @ full0 @ u, h.tag)


def npoint_reduced_exact(
    m: ModelSpec, ops: Sequence[tuple[OperatorMatrix, float]]
) -> OperatorMatrix:
    """``tr_B{O_1(t_1) ... O_N(t_N) rho_B}`` with the product in sequence order."""
    if not ops:
        raise DimensionError("npoint_reduced_exact needs at least one operator")
    prod = None
    for o0, t in ops:
        evolved = heisenberg_evolve_exact(m, o0, t).mat
        prod = evolved if prod is None else prod @ evolved
    return weighted_bath_trace(full_operator(prod, m.hi.tag), m.rho_b)


def image_extract_exact(x: OperatorMatrix, alpha: int, beta: int) -> OperatorMatrix:
    """Image block ``T_alpha^dag x T_beta``: ``result[i,j] = x[(i,a),(j,b)]``."""
    if x.tag.kind is not Space.FULL:
        raise DimensionError("image extraction expects a full-space operator")
    d_s, d_b = x.tag.dim_system, x.tag.dim_bath
    if not (0 <= alpha < d_b and 0 <= beta < d_b):
        raise IndexOutOfRange(f"bath indices ({alpha}, {beta}) outside [0, {d_b})")
    blocks = x.mat.reshape(d_s, d_b, d_s, d_b)
    return system_operator(blocks[:, alpha, :, beta], x.tag)


def expectation(o_s: OperatorMatrix, rho0: DensityMatrix) -> complex:
    """``tr(o_s rho0)`` on the system space."""
    if o_s.tag.kind is not Space.SYSTEM or rho0.tag.kind is not Space.SYSTEM:
        raise DimensionError("expectation expects system-space operands")
    if o_s.tag.dim_system != rho0.tag.dim_system:
        raise DimensionError("system dimensions differ")
    return complex(np.trace(o_s.mat @ rho0.mat))
