"""Super-operators, one-point operators, series inversion and star products.

The order-n dressing of a system operator is built directly from the Dyson
product of the truncated propagator family with its adjoint, which places
the kernel adjoints on the *right* factors:

    (P[n] A)_ab = sum_{r=0}^n i^(n-2r) sum_g K[n-r]_ag A (K[r]_bg)^dag .

Written with kernel blocks transposed-and-daggered this is the familiar
``i^(n-2r) K^dag A K`` sandwich; the two readings differ once the
interaction-picture Hamiltonian stops commuting with itself at different
times, and only the Dyson-derived one reproduces exact dynamics to the
truncation order.  `printed_sandwich_defect` measures the difference so
the discrepancy stays visible instead of silently resolved.

Contractions with the bath state use ``rho_B[b, a]`` throughout, matching
the reduced-operator definition; star products close the index chain with
``rho_B[a_{N+1}, a_1]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyson import KernelSet
from .errors import DimensionError, OrderExceedsKernels
from .images import ImageFamily
from .spaces import DensityMatrix, OperatorMatrix, Space, SpaceTag, TimeGrid, system_operator


@dataclass(frozen=True)
class SeriesTruncation:
    """Total perturbative order and coupling strength of a series evaluation."""

    order: int
    lam: float

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"truncation order must be >= 0, got {self.order}")


@dataclass
class OnePointTrajectory:
    """One-point operator values on a time grid at fixed truncation."""

    label: str
    observable: np.ndarray
    grid: TimeGrid
    values: np.ndarray  # (n_t, d_S, d_S)
    truncation: SeriesTruncation


def _obs_matrix(o) -> np.ndarray:
    if isinstance(o, OperatorMatrix):
        if o.tag.kind is not Space.SYSTEM:
            raise DimensionError("observables must live on the system space")
        return o.mat
    return np.asarray(o, dtype=complex)


def _system_tag(ks: KernelSet) -> SpaceTag:
    return SpaceTag(Space.SYSTEM, ks.dim_system, ks.dim_bath)


def _check_order(ks: KernelSet, order: int) -> None:
    if order > ks.orders:
        raise OrderExceedsKernels(
            f"series order {order} exceeds computed kernel order {ks.orders}"
        )


def _padded_powers(n: int) -> np.ndarray:
    # i^(n-2r) for r = 0..n
    return np.array([1j ** (n - 2 * r) for r in range(n + 1)])


def _apply_P_blocks(n: int, a: np.ndarray, kstack: np.ndarray) -> np.ndarray:
    """Dyson-derived order-n sandwich, returning family blocks."""
    coeffs = _padded_powers(n)
    db = kstack.shape[1]
    ds = a.shape[0]
    out = np.zeros((db, db, ds, ds), dtype=complex)
    for r in range(n + 1):
        out += coeffs[r] * np.einsum(
            "agij,jk,bgmk->abim", kstack[n - r], a, kstack[r].conj()
        )
    return out


def _apply_P_blocks_printed(n: int, a: np.ndarray, kstack: np.ndarray) -> np.ndarray:
    """The same sandwich with daggers on the left factors, as displayed."""
    coeffs = _padded_powers(n)
    db = kstack.shape[1]
    ds = a.shape[0]
    out = np.zeros((db, db, ds, ds), dtype=complex)
    for r in range(n + 1):
        out += coeffs[r] * np.einsum(
            "gaji,jk,gbkm->abim", kstack[n - r].conj(), a, kstack[r]
        )
    return out


def apply_P_ab(n: int, a, t: float, ks: KernelSet) -> ImageFamily:
    """Order-n super-operator dressing of a system operator, open bath indices."""
    _check_order(ks, n)
    return ImageFamily(_apply_P_blocks(n, _obs_matrix(a), ks.heis_stack(t)), t)


def apply_P_S(n: int, a, t: float, ks: KernelSet, rho_b: DensityMatrix) -> np.ndarray:
    """Bath-contracted order-n dressing ``(P[n] A)_ab rho_B[b, a]``."""
    _check_order(ks, n)
    blocks = _apply_P_blocks(n, _obs_matrix(a), ks.heis_stack(t))
    return np.einsum("abij,ba->ij", blocks, rho_b.mat)


def printed_sandwich_defect(n: int, a, t: float, ks: KernelSet) -> float:
    """Max-norm gap between the Dyson-derived and as-displayed order-n sandwiches."""
    kstack = ks.heis_stack(t)
    a = _obs_matrix(a)
    return float(
        np.max(np.abs(_apply_P_blocks(n, a, kstack) - _apply_P_blocks_printed(n, a, kstack)))
    )


def free_evolved(o, ks: KernelSet, t: float) -> np.ndarray:
    """Free Heisenberg conjugation ``U0(t)^dag O U0(t)``."""
    return ks.frame.free_conjugate(_obs_matrix(o), t)


def one_point_value(o, trunc: SeriesTruncation, ks: KernelSet, rho_b: DensityMatrix, t: float) -> np.ndarray:
    """Truncated one-point series ``sum_n (lam/hbar)^n P_S[n] U0^dag O U0`` at one time."""
    _check_order(ks, trunc.order)
    hbar = ks.frame.constants.hbar
    b = free_evolved(o, ks, t)
    kstack = ks.heis_stack(t)
    out = np.zeros_like(b)
    for n in range(trunc.order + 1):
        blocks = _apply_P_blocks(n, b, kstack)
        out += (trunc.lam / hbar) ** n * np.einsum("abij,ba->ij", blocks, rho_b.mat)
    return out


def one_point_operator(
    o,
    trunc: SeriesTruncation,
    ks: KernelSet,
    rho_b: DensityMatrix,
    grid: TimeGrid,
    label: str = "O",
) -> OnePointTrajectory:
    """One-point operator trajectory over a grid at fixed truncation."""
    o_mat = _obs_matrix(o)
    values = np.stack([one_point_value(o_mat, trunc, ks, rho_b, float(t)) for t in grid])
    return OnePointTrajectory(label, o_mat, grid, values, trunc)


def trajectory_value(o_s: OnePointTrajectory, ks: KernelSet, rho_b: DensityMatrix, t: float) -> np.ndarray:
    """Value of a trajectory at time t (grid hit or recomputed from kernels)."""
    hits = np.flatnonzero(np.isclose(o_s.grid.points, t, rtol=0.0, atol=1e-14))
    if hits.size:
        return o_s.values[hits[0]]
    return one_point_value(o_s.observable, o_s.truncation, ks, rho_b, t)


def _inverted_series(
    value: np.ndarray,
    order: int,
    lam: float,
    ks: KernelSet,
    rho_b: DensityMatrix,
    t: float,
) -> list[np.ndarray]:
    """``inv[m] = (1 + sum lam^n P_S[n])^{-1} value`` truncated at order m, m = 0..order.

    Uses the recursion ``inv[m] = value - sum_{j=1}^m (lam/hbar)^j P_S[j] inv[m-j]``,
    which resums the multinomial expansion with total-order truncation.
    """
    hbar = ks.frame.constants.hbar
    kstack = ks.heis_stack(t)
    rho = rho_b.mat
    inv = [value]
    for m in range(1, order + 1):
        acc = value.copy()
        for j in range(1, m + 1):
            blocks = _apply_P_blocks(j, inv[m - j], kstack)
            acc -= (lam / hbar) ** j * np.einsum("abij,ba->ij", blocks, rho)
        inv.append(acc)
    return inv


def invert_one_point(
    o_s_value,
    trunc: SeriesTruncation,
    ks: KernelSet,
    rho_b: DensityMatrix,
    t: float,
) -> np.ndarray:
    """Recover ``U0^dag O U0`` from a one-point value via the multinomial inverse."""
    _check_order(ks, trunc.order)
    value = _obs_matrix(o_s_value)
    return _inverted_series(value, trunc.order, trunc.lam, ks, rho_b, t)[trunc.order]


def image_from_value(
    value: np.ndarray,
    trunc: SeriesTruncation,
    ks: KernelSet,
    rho_b: DensityMatrix,
    t: float,
) -> ImageFamily:
    """Image family from a one-point value (the series inversion composed with P[n]).

    Truncation is by *total* order ``n + n_1 + ... + n_k``, never per factor;
    the order-by-order cancellation that returns the one-point value under
    bath contraction holds only with total-order truncation.
    """
    _check_order(ks, trunc.order)
    hbar = ks.frame.constants.hbar
    inv = _inverted_series(value, trunc.order, trunc.lam, ks, rho_b, t)
    kstack = ks.heis_stack(t)
    db, ds = ks.dim_bath, ks.dim_system
    out = np.zeros((db, db, ds, ds), dtype=complex)
    for n in range(trunc.order + 1):
        out += (trunc.lam / hbar) ** n * _apply_P_blocks(n, inv[trunc.order - n], kstack)
    return ImageFamily(out, t)


def image_from_one_point(
    o_s: OnePointTrajectory, ks: KernelSet, rho_b: DensityMatrix, t: float
) -> ImageFamily:
    """Image family of a one-point trajectory at time t."""
    value = trajectory_value(o_s, ks, rho_b, t)
    return image_from_value(value, o_s.truncation, ks, rho_b, t)


def lifted_factor(
    o,
    trunc: SeriesTruncation,
    ks: KernelSet,
    rho_b: DensityMatrix,
    t: float,
    trivial: bool = False,
) -> ImageFamily:
    """One star-product factor: the image family of the observable's one-point value.

    With ``trivial=True`` the factor enters as ``O_S(t) delta_ab`` (its
    partition restricted to the order-zero pair), which is how mixed
    correlators with an already-reduced middle factor are assembled.
    """
    value = one_point_value(o, trunc, ks, rho_b, t)
    if trivial:
        db = ks.dim_bath
        blocks = np.zeros((db, db) + value.shape, dtype=complex)
        idx = np.arange(db)
        blocks[idx, idx] = value
        return ImageFamily(blocks, t)
    return image_from_value(value, trunc, ks, rho_b, t)


def chain_contract(families: list[ImageFamily], rho_b: DensityMatrix) -> np.ndarray:
    """Chain-compose families and close the index loop with ``rho_B[a_{N+1}, a_1]``."""
    from . import _blockops

    prod = families[0].blocks
    for f in families[1:]:
        prod = _blockops.fam_mul(prod, f.blocks)
    return np.einsum("abij,ba->ij", prod, rho_b.mat)


def star_product(
    factors,
    ks: KernelSet,
    rho_b: DensityMatrix,
) -> OperatorMatrix:
    """Deformed product ``O_S(t_1) * ... * O_S(t_N)`` of one-point trajectories.

    ``factors`` is a sequence of ``(OnePointTrajectory, time)`` pairs sharing
    kernels and truncation.  Each factor is lifted to its image family, the
    families are chain-composed, and the chain is closed with the bath state.
    """
    factors = list(factors)
    if not factors:
        raise DimensionError("star_product needs at least one factor")
    truncs = {(f.truncation.order, f.truncation.lam) for f, _ in factors}
    if len(truncs) > 1:
        raise DimensionError(f"star_product factors disagree on truncation: {truncs}")
    families = [image_from_one_point(f, ks, rho_b, float(t)) for f, t in factors]
    return system_operator(chain_contract(families, rho_b), _system_tag(ks))


def star_of_observables(
    entries,
    trunc: SeriesTruncation,
    ks: KernelSet,
    rho_b: DensityMatrix,
) -> np.ndarray:
    """Star product straight from observables: ``entries`` is a sequence of
    ``(observable, time)`` or ``(observable, time, trivial_flag)`` tuples."""
    families = []
    for entry in entries:
        o, t, *rest = entry
        trivial = bool(rest[0]) if rest else False
        families.append(lifted_factor(o, trunc, ks, rho_b, float(t), trivial=trivial))
    return chain_contract(families, rho_b)


def _apply_DtP_S(
    n: int,
    a: np.ndarray,
    kstack: np.ndarray,
    cov_stack: np.ndarray,
    rho: np.ndarray,
) -> np.ndarray:
    """Kernel-derivative super-operator of order n, bath-contracted.

    Product rule over the two kernel slots of the order-n sandwich, with the
    time derivative taken covariantly (inside the ``U0 ... U0^dag`` frame).
    """
    coeffs = _padded_powers(n)
    out = np.zeros_like(a)
    for r in range(n + 1):
        left = np.einsum("agij,jk,bgmk,ba->im", cov_stack[n - r], a, kstack[r].conj(), rho)
        right = np.einsum("agij,jk,bgmk,ba->im", kstack[n - r], a, cov_stack[r].conj(), rho)
        out += coeffs[r] * (left + right)
    return out


def one_point_rhs(
    o_s: OnePointTrajectory,
    t: float,
    ks: KernelSet,
    rho_b: DensityMatrix,
) -> OperatorMatrix:
    """Local-in-time RHS of the one-point evolution at the trajectory's truncation.

    ``(i/hbar)[H0, O_S] + sum (-1)^k (lam/hbar)^(n+n_1+...+n_k)
    DtP_S[n] P_S[n_1] ... P_S[n_k] O_S`` with total-order truncation; the
    kernel derivatives come from the recurrence, so no differencing enters.
    """
    trunc = o_s.truncation
    _check_order(ks, trunc.order)
    hbar = ks.frame.constants.hbar
    value = trajectory_value(o_s, ks, rho_b, t)
    inv = _inverted_series(value, trunc.order, trunc.lam, ks, rho_b, t)
    kstack = ks.heis_stack(t)
    cov_stack = ks.cov_d_stack(t)
    h0 = ks.frame.h0_mat
    out = (1j / hbar) * (h0 @ value - value @ h0)
    for n in range(1, trunc.order + 1):
        out += (trunc.lam / hbar) ** n * _apply_DtP_S(
            n, inv[trunc.order - n], kstack, cov_stack, rho_b.mat
        )
    return system_operator(out, _system_tag(ks))
