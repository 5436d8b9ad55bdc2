"""Interaction picture and the time-ordered perturbative kernels.

The interaction-picture Hamiltonian family is
``Htilde_ab(t) = U0(t) H_Iab U0(t)^dag exp(-i(E_a - E_b)t/hbar)`` with
``U0(t) = exp(-i H0 t / hbar)``.  The order-n kernel is the nested
time-ordered integral of n such factors (latest time leftmost); it is
computed here by integrating the equivalent recurrence

    d/dt Ktilde[n](t) = Htilde(t) . Ktilde[n-1](t),   Ktilde[n>=1](0) = 0,

which costs one coupled ODE solve instead of n-dimensional quadrature
(quadrature survives only as a test oracle).  Kernels are stored per grid
point; off-grid requests use the integrator's dense output.

The heavy lifting happens in the H0 eigenbasis, where applying ``U0`` is an
elementwise phase; results are rotated back on access.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from . import _blockops
from .errors import IntegratorFailure, OrderExceedsKernels
from .images import ImageFamily, to_image_family
from .model import ModelSpec
from .spaces import Constants, OperatorMatrix, TimeGrid

KERNEL_RTOL = 1e-12
KERNEL_ATOL = 1e-12


@dataclass(frozen=True)
class InteractionFrame:
    """Free-evolution data: H0 eigensystem, bath energies, constants."""

    eps0: np.ndarray  # H0 eigenvalues
    v0: np.ndarray  # H0 eigenvectors, columns
    bath_energies: np.ndarray
    constants: Constants
    h0_mat: np.ndarray

    def u0(self, t: float) -> np.ndarray:
        """``exp(-i H0 t / hbar)``; ``u0(0)`` is the identity."""
        return (self.v0 * np.exp(-1j * self.eps0 * t / self.constants.hbar)) @ self.v0.conj().T

    def free_conjugate(self, o: np.ndarray, t: float) -> np.ndarray:
        """Free Heisenberg evolution ``U0(t)^dag o U0(t)``."""
        phases = np.exp(1j * self.eps0 * t / self.constants.hbar)
        inner = (self.v0.conj().T @ o @ self.v0) * np.outer(phases, phases.conj())
        return self.v0 @ inner @ self.v0.conj().T


def frame_of(m: ModelSpec) -> InteractionFrame:
    eps0, v0 = np.linalg.eigh(m.h0.mat)
    return InteractionFrame(eps0, v0, m.bath_energies, m.constants, m.h0.mat.copy())


def interaction_hamiltonian_images(m: ModelSpec, t: float) -> ImageFamily:
    """The family ``Htilde_ab(t)``; at ``t = 0`` these are the Schrodinger images."""
    fr = frame_of(m)
    hbar = m.constants.hbar
    u = fr.u0(t)
    hi_fam = to_image_family(m.hi).blocks
    delta = (m.bath_energies[:, None] - m.bath_energies[None, :]) / hbar
    phases = np.exp(-1j * delta * t)
    blocks = np.einsum("ip,abpq,qj->abij", u, hi_fam, u.conj().T) * phases[:, :, None, None]
    return ImageFamily(blocks, t)


class KernelSet:
    """Time-ordered kernels of all orders up to ``orders`` on a grid.

    ``tilde_at(n, t)`` returns interaction-picture blocks ``Ktilde[n]_ab(t)``
    in the original basis; ``heis_at(n, t)`` returns the Heisenberg-frame
    kernels ``K[n]_ab(t) = exp(+i(E_a-E_b)t/hbar) U0^dag Ktilde U0``.
    """

    def __init__(self, m: ModelSpec, n_max: int, grid: TimeGrid, sol, eig_grid: np.ndarray):
        self.model = m
        self.orders = n_max
        self.grid = grid
        self.frame = frame_of(m)
        self._sol = sol  # dense OdeSolution over [0, grid.stop], or None
        self._eig_grid = eig_grid  # (n_max, n_t, dB, dB, dS, dS), H0 eigenbasis
        d_s, d_b = m.dim_system, m.dim_bath
        self.dim_system, self.dim_bath = d_s, d_b
        hbar = m.constants.hbar
        hi_fam = to_image_family(m.hi).blocks
        v = self.frame.v0
        self._hi_fam = hi_fam
        self._hi_eig = np.einsum("pi,abpq,qj->abij", v.conj(), hi_fam, v)
        delta_b = (m.bath_energies[:, None] - m.bath_energies[None, :]) / hbar
        delta_s = (self.frame.eps0[:, None] - self.frame.eps0[None, :]) / hbar
        self._omega = delta_b[:, :, None, None] + delta_s[None, None, :, :]
        self._delta_b = delta_b
        self._cache: dict[tuple[str, float], np.ndarray] = {}

    # -- raw stacks ---------------------------------------------------------

    def _eig_stack(self, t: float) -> np.ndarray:
        """Orders 1..n_max at time t, H0 eigenbasis.

        Grid hits return the stored per-grid-point values; anything else
        comes from the integrator's dense output.
        """
        shape = (self.orders,) + self._omega.shape
        if self.orders == 0:
            return np.zeros((0,) + self._omega.shape, dtype=complex)
        if t == 0.0 or self._sol is None:
            return np.zeros(shape, dtype=complex)
        hits = np.flatnonzero(self.grid.points == t)
        if hits.size:
            return self._eig_grid[:, hits[0]]
        lo, hi = self._sol.t_min, self._sol.t_max
        if not (lo - 1e-12 <= t <= hi * (1 + 1e-12) + 1e-12):
            raise OrderExceedsKernels(
                f"kernels were computed on [0, {hi!r}] but t={t!r} was requested"
            )
        return self._sol(min(t, hi)).reshape(shape)

    def _stack(self, kind: str, t: float) -> np.ndarray:
        """Orders 0..n_max in the original basis; kind 'tilde' or 'heis'."""
        key = (kind, float(t))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        eig = self._eig_stack(t)
        if kind == "heis":
            eig = eig * np.exp(1j * self._omega * t)[None]
        v = self.frame.v0
        rotated = np.einsum("ip,nabpq,qj->nabij", v, eig, v.conj().T)
        out = np.concatenate(
            [_blockops.identity_family(self.dim_system, self.dim_bath)[None], rotated]
        )
        if len(self._cache) > 256:
            self._cache.clear()
        self._cache[key] = out
        return out

    def tilde_stack(self, t: float) -> np.ndarray:
        return self._stack("tilde", t)

    def heis_stack(self, t: float) -> np.ndarray:
        return self._stack("heis", t)

    def cov_d_stack(self, t: float) -> np.ndarray:
        """Covariant kernel derivatives ``U0^dag d/dt[U0 K[n] U0^dag] U0``.

        From the recurrence these are known without differencing:
        ``(i/hbar)(E_a - E_b) K[n]_ab + sum_g H_Iag K[n-1]_gb``; order 0
        vanishes identically.
        """
        key = ("cov", float(t))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        heis = self.heis_stack(t)
        out = np.zeros_like(heis)
        phase = 1j * self._delta_b[:, :, None, None]
        for n in range(1, self.orders + 1):
            out[n] = phase * heis[n] + _blockops.fam_mul(self._hi_fam, heis[n - 1])
        self._cache[key] = out
        return out

    # -- per-order access ---------------------------------------------------

    def _check_order(self, n: int) -> None:
        if n < 0 or n > self.orders:
            raise OrderExceedsKernels(f"order {n} requested, kernels available up to {self.orders}")

    def tilde_at(self, n: int, t: float) -> ImageFamily:
        self._check_order(n)
        return ImageFamily(self.tilde_stack(t)[n].copy(), t)

    def heis_at(self, n: int, t: float) -> ImageFamily:
        self._check_order(n)
        return ImageFamily(self.heis_stack(t)[n].copy(), t)


def compute_kernels(
    m: ModelSpec,
    n_max: int = 4,
    grid: TimeGrid = None,
    rtol: float = KERNEL_RTOL,
    atol: float = KERNEL_ATOL,
) -> KernelSet:
    """Integrate the kernel recurrence up to order ``n_max`` over ``grid``."""
    if grid is None:
        raise ValueError("compute_kernels needs a TimeGrid")
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    d_s, d_b = m.dim_system, m.dim_bath
    fam_shape = (d_b, d_b, d_s, d_s)
    if n_max == 0 or grid.stop == 0.0:
        eig_grid = np.zeros((n_max, len(grid)) + fam_shape, dtype=complex)
        return KernelSet(m, n_max, grid, None, eig_grid)

    frame = frame_of(m)
    hbar = m.constants.hbar
    v = frame.v0
    hi_fam = to_image_family(m.hi).blocks
    hi_eig = np.ascontiguousarray(np.einsum("pi,abpq,qj->abij", v.conj(), hi_fam, v))
    delta_b = (m.bath_energies[:, None] - m.bath_energies[None, :]) / hbar
    delta_s = (frame.eps0[:, None] - frame.eps0[None, :]) / hbar
    omega = np.ascontiguousarray(delta_b[:, :, None, None] + delta_s[None, None, :, :])

    shape = (n_max,) + fam_shape

    def rhs(t, y):
        stack = np.ascontiguousarray(y.reshape(shape))
        return _blockops.kernel_stack_rhs(hi_eig, omega, t, stack).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, grid.stop),
        np.zeros(int(np.prod(shape)), dtype=complex),
        method="DOP853",
        t_eval=grid.points,
        dense_output=True,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegratorFailure(f"kernel recurrence failed: {sol.message}")
    eig_grid = np.ascontiguousarray(sol.y.T.reshape((len(grid),) + shape).transpose(1, 0, 2, 3, 4, 5))
    return KernelSet(m, n_max, grid, sol.sol, eig_grid)


def dyson_propagator(ks: KernelSet, lam: float, order: int, t: float) -> ImageFamily:
    """Truncated evolution-operator family ``sum_n (-i lam/hbar)^n Ktilde[n](t)``."""
    if order > ks.orders:
        raise OrderExceedsKernels(f"order {order} requested, kernels available up to {ks.orders}")
    hbar = ks.frame.constants.hbar
    stack = ks.tilde_stack(t)
    out = np.zeros_like(stack[0])
    for n in range(order + 1):
        out += (-1j * lam / hbar) ** n * stack[n]
    return ImageFamily(out, t)


def image_first_order(o: OperatorMatrix | np.ndarray, ks: KernelSet, lam: float, t: float) -> ImageFamily:
    """First-order interaction-picture image family of a system observable.

    ``O delta_ab + (i lam/hbar) [Ktilde[1]_ab(t), O]``; the commutator with
    the time integral equals the integral of commutators.
    """
    if ks.orders < 1:
        raise OrderExceedsKernels("first-order images need kernels of order >= 1")
    o_mat = o.mat if isinstance(o, OperatorMatrix) else np.asarray(o, dtype=complex)
    hbar = ks.frame.constants.hbar
    k1 = ks.tilde_stack(t)[1]
    blocks = (1j * lam / hbar) * (k1 @ o_mat - o_mat @ k1)
    idx = np.arange(ks.dim_bath)
    blocks[idx, idx] += o_mat
    return ImageFamily(blocks, t)
