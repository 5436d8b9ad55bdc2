"""Markovian limit: interaction decomposition, assumption checks, spectral
coefficients and the adjoint Lindblad-form generator.

The interaction is split as ``H_I = sum_i R^i (x) S^i`` with *hermitian*
factors (a real-structured operator-Schmidt decomposition); hermitian
factors are what make the half-line bath correlation functions close under
conjugation, which the generator derivation relies on.  All bath
correlators are evaluated in the working (H_B eigen-) basis where the
interaction-picture bath factors are pure phase twists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import (
    DimensionError,
    IntegratorFailure,
    NonConvergent,
    NonHermitianInput,
)
from .model import ModelSpec
from .spaces import Constants, OperatorMatrix, Space, TimeGrid, herm_defect, HERM_TOL

SCHMIDT_CUTOFF = 1e-12
RECONSTRUCTION_TOL = 1e-10


@dataclass(frozen=True)
class InteractionDecomposition:
    """``H_I = sum_i R^i (x) S^i`` with hermitian system/bath factors."""

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def r_norms(self) -> tuple[float, ...]:
        return tuple(float(np.linalg.norm(r, 2)) for r, _ in self.terms)

    def reconstruct(self) -> np.ndarray:
        return sum(np.kron(r, s) for r, s in self.terms)


def _hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal (Frobenius) basis of hermitian n x n matrices."""
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[i, j] = s[j, i] = 1.0 / np.sqrt(2)
            basis.append(s)
            a = np.zeros((n, n), dtype=complex)
            a[i, j] = -1j / np.sqrt(2)
            a[j, i] = 1j / np.sqrt(2)
            basis.append(a)
    return np.stack(basis)


def decompose_interaction(hi: OperatorMatrix) -> InteractionDecomposition:
    """Operator-Schmidt decomposition of a hermitian full-space interaction.

    The SVD runs over the real coefficient matrix of hermitian product
    bases, so every returned factor is hermitian; singular values and the
    reconstruction agree with the complex reshaping route.  Terms with
    singular value below ``1e-12 * s_max`` are dropped.
    """
    if hi.tag.kind is not Space.FULL:
        raise DimensionError("decompose_interaction expects a full-space operator")
    if herm_defect(hi.mat) > HERM_TOL:
        raise NonHermitianInput("H_I is not hermitian")
    d_s, d_b = hi.tag.dim_system, hi.tag.dim_bath
    f_sys = _hermitian_basis(d_s)
    g_bath = _hermitian_basis(d_b)
    r4 = hi.mat.reshape(d_s, d_b, d_s, d_b).transpose(0, 2, 1, 3)
    coeff = np.einsum("aij,ijkl,bkl->ab", f_sys.conj(), r4, g_bath.conj())
    if np.max(np.abs(coeff.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeff))):
        raise NonHermitianInput("hermitian-basis coefficients came out complex")
    u, s, vt = np.linalg.svd(coeff.real)
    terms = []
    for k, sk in enumerate(s):
        if sk < SCHMIDT_CUTOFF * s[0]:
            break
        rk = np.sqrt(sk) * np.einsum("a,aij->ij", u[:, k], f_sys)
        sk_mat = np.sqrt(sk) * np.einsum("b,bij->ij", vt[k], g_bath)
        terms.append((rk, sk_mat))
    dec = InteractionDecomposition(tuple(terms))
    defect = np.linalg.norm(dec.reconstruct() - hi.mat) / max(1.0, np.linalg.norm(hi.mat))
    if defect > RECONSTRUCTION_TOL:
        raise DimensionError(f"Schmidt reconstruction defect {defect:.2e} exceeds tolerance")
    return dec


# -- bath correlation functions ----------------------------------------------


def _bath_phases(m: ModelSpec) -> np.ndarray:
    e = m.bath_energies
    return (e[:, None] - e[None, :]) / m.constants.hbar


def bath_correlation(m: ModelSpec, dec: InteractionDecomposition, i: int, j: int, t: float, tau: float) -> complex:
    """``<S~^i(t) S~^j(t - tau)>_B`` in the working bath basis."""
    delta = _bath_phases(m)
    s_i = dec.terms[i][1] * np.exp(-1j * delta * t)
    s_j = dec.terms[j][1] * np.exp(-1j * delta * (t - tau))
    return complex(np.trace(s_i @ s_j @ m.rho_b.mat))


def first_moment(m: ModelSpec, dec: InteractionDecomposition, i: int, t: float) -> complex:
    """``tr_B{S~^i(t) rho_B}``: the order-lambda contraction that must vanish."""
    delta = _bath_phases(m)
    s_i = dec.terms[i][1] * np.exp(-1j * delta * t)
    return complex(np.trace(s_i @ m.rho_b.mat))


@dataclass(frozen=True)
class MarkovReport:
    """Quantified assumption defects; honest about finite-bath recurrences.

    Rapid decay has no hard boolean at finite bath dimension, so it is
    reported as a crossing time plus the correlation profile; the caller's
    thresholds decide.
    """

    first_moment_by_term: tuple[float, ...]
    first_moment_max: float
    stationarity_defect: float
    tau: np.ndarray
    corr_profile: np.ndarray  # max_ij |C(0, tau)|
    decay_time: float | None
    decay_threshold: float
    horizon: float
    r_norm_sum: float
    bath_gap_max: float
    passes: dict = field(default_factory=dict)

    def tail_mass(self, lo: float, hi: float | None = None) -> float:
        """``int_lo^hi max_ij |C(0, tau)| dtau`` from the sampled profile."""
        hi = self.horizon if hi is None else min(hi, self.horizon)
        if lo >= hi:
            return 0.0
        mask = (self.tau >= lo) & (self.tau <= hi)
        return float(np.trapezoid(self.corr_profile[mask], self.tau[mask]))

    def rhs_defect_bound(
        self,
        o_norm: float,
        t_eval: float,
        lam: float,
        hbar: float,
        j_horizon: float | None = None,
        quad_tol: float = 1e-9,
    ) -> float:
        """Bound on ``|lindblad_rhs - one_point_rhs(order 2)|`` at time ``t_eval``.

        Four kernel-sandwich integrals enter the order-lambda^2 generator;
        each inherits (a) the correlation mass between the evaluation time
        and the J-integration horizon, (b) the stationarity defect
        accumulated over the integration window, and (c) quadrature error.
        A nonzero first moment feeds the order-lambda super-operators, with
        the bath phase gradient controlling its time derivative.  A small
        absolute floor covers kernel-ODE rounding.
        """
        lh = lam / hbar
        j_horizon = self.horizon if j_horizon is None else j_horizon
        window = max(t_eval, j_horizon)
        mismatch = self.tail_mass(min(t_eval, j_horizon), max(t_eval, j_horizon))
        second = 4.0 * lh**2 * self.r_norm_sum**2 * o_norm * (
            mismatch + self.stationarity_defect * window + quad_tol
        )
        first = 2.0 * lh * self.r_norm_sum * o_norm * self.first_moment_max * (
            1.0 + self.bath_gap_max * window
        )
        floor = 1e-9 * o_norm * max(1.0, lh**2 * self.r_norm_sum**2)
        return second + first + floor


def check_markov_assumptions(
    m: ModelSpec,
    dec: InteractionDecomposition,
    horizon: float,
    decay_threshold: float,
    first_moment_threshold: float = 1e-10,
    stationarity_threshold: float = 1e-10,
    n_time_samples: int = 7,
    n_tau: int = 401,
) -> MarkovReport:
    """Sample the three Markov assumptions and report their defects."""
    n_terms = len(dec.terms)
    t_samples = np.linspace(0.0, horizon, n_time_samples)
    tau_fine = np.linspace(0.0, horizon, n_tau)

    fm = tuple(
        float(max(abs(first_moment(m, dec, i, t)) for t in t_samples)) for i in range(n_terms)
    )

    tau_coarse = np.linspace(0.0, horizon, min(41, n_tau))
    stat = 0.0
    for i in range(n_terms):
        for j in range(n_terms):
            base = np.array([bath_correlation(m, dec, i, j, 0.0, tau) for tau in tau_coarse])
            for t in t_samples[1:]:
                probe = np.array([bath_correlation(m, dec, i, j, t, tau) for tau in tau_coarse])
                stat = max(stat, float(np.max(np.abs(probe - base))))

    profile = np.zeros_like(tau_fine)
    for i in range(n_terms):
        for j in range(n_terms):
            vals = np.array([bath_correlation(m, dec, i, j, 0.0, tau) for tau in tau_fine])
            profile = np.maximum(profile, np.abs(vals))
    below = np.flatnonzero(profile < decay_threshold)
    decay_time = float(tau_fine[below[0]]) if below.size else None

    delta = _bath_phases(m)
    report = MarkovReport(
        first_moment_by_term=fm,
        first_moment_max=max(fm) if fm else 0.0,
        stationarity_defect=stat,
        tau=tau_fine,
        corr_profile=profile,
        decay_time=decay_time,
        decay_threshold=decay_threshold,
        horizon=horizon,
        r_norm_sum=float(sum(np.linalg.norm(r, 2) for r, _ in dec.terms)),
        bath_gap_max=float(np.max(np.abs(delta))),
        passes={
            "first_moment": (max(fm) if fm else 0.0) <= first_moment_threshold,
            "stationarity": stat <= stationarity_threshold,
            "decay": decay_time is not None,
        },
    )
    return report


# -- Bohr decomposition -------------------------------------------------------


@dataclass(frozen=True)
class BohrDecomposition:
    """Fourier data of the freely evolved system coupling operators.

    ``sum_w exp(i w t) A^i_w = U0(t) R^i U0(t)^dag`` for every term i.
    """

    frequencies: tuple[float, ...]
    coefficients: dict  # (term index, frequency) -> ndarray


def _merge_frequencies(raw: np.ndarray, tol: float) -> np.ndarray:
    vals = np.sort(raw)
    merged = [vals[0]]
    for v in vals[1:]:
        if v - merged[-1] > tol:
            merged.append(v)
    return np.array(merged)


def bohr_decomposition(r, h0, hbar: float = 1.0) -> list[tuple[float, np.ndarray]]:
    """Bohr components of one system coupling operator.

    Frequencies are eigenvalue differences of ``H0`` over hbar, merged when
    closer than ``1e-9 * max|eps|`` so eigensolver noise cannot split a
    line; ``A_w`` collects the matrix elements on that line, expressed in
    the original basis.
    """
    r = r.mat if isinstance(r, OperatorMatrix) else np.asarray(r, dtype=complex)
    h0 = h0.mat if isinstance(h0, OperatorMatrix) else np.asarray(h0, dtype=complex)
    if herm_defect(h0) > HERM_TOL:
        raise NonHermitianInput("H0 is not hermitian")
    eps, v = np.linalg.eigh(h0)
    r_eig = v.conj().T @ r @ v
    scale = float(np.max(np.abs(eps))) if eps.size else 0.0
    tol = 1e-9 * max(scale, 1e-3) / hbar
    omegas = (eps[None, :] - eps[:, None]) / hbar  # w(a, b) = (eps_b - eps_a)/hbar
    merged = _merge_frequencies(omegas.ravel(), tol)
    out = []
    norm = max(1.0, float(np.linalg.norm(r)))
    for w in merged:
        mask = np.abs(omegas - w) <= tol
        if not mask.any():
            continue
        a_w = v @ (r_eig * mask) @ v.conj().T
        if np.linalg.norm(a_w) > 1e-14 * norm:
            out.append((float(w), a_w))
    return out


def bohr_decompose_all(dec: InteractionDecomposition, h0, hbar: float = 1.0) -> BohrDecomposition:
    """Bohr decomposition of every system factor, on a shared frequency list."""
    coefficients = {}
    freqs: list[float] = []
    for i in range(len(dec.terms)):
        for w, a_w in bohr_decomposition(dec.terms[i][0], h0, hbar):
            coefficients[(i, w)] = a_w
            if not any(abs(w - f) < 1e-15 for f in freqs):
                freqs.append(w)
    return BohrDecomposition(tuple(sorted(freqs)), coefficients)


def reconstruct_bohr(bd: BohrDecomposition, i: int, t: float) -> np.ndarray:
    """``sum_w exp(i w t) A^i_w`` (should equal ``U0 R^i U0^dag``)."""
    terms = [np.exp(1j * w * t) * a for (k, w), a in bd.coefficients.items() if k == i]
    return sum(terms)


# -- spectral coefficients ----------------------------------------------------


@dataclass(frozen=True)
class SpectralCoefficients:
    """Half-line Fourier transforms ``J^{ij}(w)`` of the bath correlators."""

    j: dict  # (i, j, w) -> complex
    horizon: float
    tolerance: float
    eta: float
    defects: dict  # (i, j, w) -> |J(horizon) - J(horizon/2)|
    converged: bool


def spectral_coefficients(
    m: ModelSpec,
    dec: InteractionDecomposition,
    freqs,
    horizon: float,
    tol: float = 1e-8,
    eta: float = 0.0,
    strict: bool = False,
    quad_limit: int = 400,
) -> SpectralCoefficients:
    """``J^{ij}(w) = int_0^horizon exp(-i w tau - eta tau) <S~^i(0) S~^j(-tau)> dtau``.

    Adaptive quadrature per (i, j, w); the convergence defect compares the
    horizon against its half.  Finite baths are quasi-periodic, so a
    non-decaying correlator is reported via ``converged=False`` (and
    `NonConvergent` in strict mode) rather than silently averaged; the
    exponential regulator ``eta`` documents the idealization when used.
    """
    n_terms = len(dec.terms)
    jmap: dict = {}
    defects: dict = {}

    def halfline(i: int, jj: int, w: float, upper: float) -> complex:
        def f_re(tau):
            c = bath_correlation(m, dec, i, jj, 0.0, tau)
            ph = np.exp(-1j * w * tau - eta * tau)
            return (ph * c).real

        def f_im(tau):
            c = bath_correlation(m, dec, i, jj, 0.0, tau)
            ph = np.exp(-1j * w * tau - eta * tau)
            return (ph * c).imag

        re, _ = quad(f_re, 0.0, upper, limit=quad_limit, epsabs=1e-11, epsrel=1e-11)
        im, _ = quad(f_im, 0.0, upper, limit=quad_limit, epsabs=1e-11, epsrel=1e-11)
        return complex(re, im)

    converged = True
    for i in range(n_terms):
        for jj in range(n_terms):
            for w in freqs:
                full = halfline(i, jj, w, horizon)
                half = halfline(i, jj, w, horizon / 2.0)
                jmap[(i, jj, float(w))] = full
                d = abs(full - half)
                defects[(i, jj, float(w))] = d
                if d > tol:
                    converged = False
    if strict and not converged:
        worst = max(defects.values())
        raise NonConvergent(f"J integrals not converged in horizon (worst defect {worst:.3e})")
    return SpectralCoefficients(jmap, horizon, tol, eta, defects, converged)


# -- the Lindblad-form generator ----------------------------------------------


def lindblad_rhs(
    o_s,
    bd: BohrDecomposition,
    sc: SpectralCoefficients,
    h0,
    constants: Constants,
    strict_paper: bool = False,
) -> np.ndarray:
    """Adjoint Lindblad-form RHS for a one-point operator.

    ``(i/hbar)[H0, O] + (i lam/hbar)^2 sum_{w w'} sum_{ij} J^{ij}(w)
    {A^{i dag}_w A^j_{w'} O - A^{i dag}_w O A^j_{w'}} + h.c.`` with the
    conjugate terms taken linearly in ``O`` (the generator of an evolution
    must be linear; for hermitian ``O`` this equals the literal adjoint).
    The default first term is the commutator: the bare product breaks
    identity fixity, and ``strict_paper=True`` restores it for comparison.
    """
    o = o_s.mat if isinstance(o_s, OperatorMatrix) else np.asarray(o_s, dtype=complex)
    h0 = h0.mat if isinstance(h0, OperatorMatrix) else np.asarray(h0, dtype=complex)
    if o.shape != h0.shape:
        raise DimensionError(f"operator shape {o.shape} vs H0 shape {h0.shape}")
    hbar, lam = constants.hbar, constants.lam
    if strict_paper:
        out = (1j / hbar) * (h0 @ o)
    else:
        out = (1j / hbar) * (h0 @ o - o @ h0)
    pref = (1j * lam / hbar) ** 2
    items = list(bd.coefficients.items())
    for (i, w), a_i in items:
        a_i_dag = a_i.conj().T
        for (jj, wp), a_j in items:
            jw = sc.j.get((i, jj, float(w)))
            if jw is None or jw == 0:
                continue
            out += pref * jw * (a_i_dag @ a_j @ o - a_i_dag @ o @ a_j)
            out += pref * np.conj(jw) * (o @ a_j.conj().T @ a_i - a_j.conj().T @ o @ a_i)
    return out


def evolve_lindblad(
    o0,
    bd: BohrDecomposition,
    sc: SpectralCoefficients,
    h0,
    constants: Constants,
    grid: TimeGrid,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    strict_paper: bool = False,
) -> np.ndarray:
    """Integrate the autonomous Lindblad-form generator over a grid.

    Returns the stack of operator values, shape ``(n_t, d_S, d_S)``.
    """
    o0 = o0.mat if isinstance(o0, OperatorMatrix) else np.asarray(o0, dtype=complex)
    shape = o0.shape

    def rhs(t, y):
        return lindblad_rhs(y.reshape(shape), bd, sc, h0, constants, strict_paper).ravel()

    sol = solve_ivp(
        rhs,
        (0.0, grid.stop if grid.stop > 0 else 1e-30),
        o0.astype(complex).ravel(),
        method="DOP853",
        t_eval=grid.points,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegratorFailure(f"Lindblad evolution failed: {sol.message}")
    return np.ascontiguousarray(sol.y.T.reshape(len(grid), *shape))
