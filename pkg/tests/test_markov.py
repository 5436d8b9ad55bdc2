"""Interaction decomposition, Markov assumptions, Bohr data, Lindblad generator."""

import numpy as np
import pytest

import heisenbath as hb
from heisenbath.dyson import compute_kernels, frame_of
from heisenbath.errors import NonConvergent, NonHermitianInput
from heisenbath.markov import (
    BohrDecomposition,
    SpectralCoefficients,
    bath_correlation,
    bohr_decompose_all,
    bohr_decomposition,
    check_markov_assumptions,
    decompose_interaction,
    evolve_lindblad,
    first_moment,
    lindblad_rhs,
    reconstruct_bohr,
    spectral_coefficients,
)
from heisenbath.model import make_model
from heisenbath.spaces import Constants, TimeGrid, full_operator
from heisenbath.superop import SeriesTruncation, one_point_operator, one_point_rhs
from helpers import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


class TestDecomposeInteraction:
    def test_rank_one(self):
        rng = np.random.default_rng(0)
        a, b = random_hermitian(rng, 2), random_hermitian(rng, 3)
        dec = decompose_interaction(full_operator(np.kron(a, b), (2, 3)))
        assert len(dec.terms) == 1
        r, s = dec.terms[0]
        assert np.allclose(np.kron(r, s), np.kron(a, b), atol=1e-12)

    def test_two_qubit_three_terms(self):
        m = hb.two_qubit(0.25).model
        dec = decompose_interaction(m.hi)
        assert len(dec.terms) == 3
        assert np.max(np.abs(dec.reconstruct() - m.hi.mat)) < 1e-12

    def test_factors_are_hermitian(self):
        rng = np.random.default_rng(1)
        dec = decompose_interaction(full_operator(random_hermitian(rng, 6), (2, 3)))
        for r, s in dec.terms:
            assert np.max(np.abs(r - r.conj().T)) < 1e-12
            assert np.max(np.abs(s - s.conj().T)) < 1e-12

    def test_random_reconstruction(self):
        rng = np.random.default_rng(2)
        hi = full_operator(random_hermitian(rng, 8), (2, 4))
        dec = decompose_interaction(hi)
        defect = np.linalg.norm(dec.reconstruct() - hi.mat) / np.linalg.norm(hi.mat)
        assert defect < 1e-10

    def test_rejects_non_hermitian(self):
        bad = np.zeros((4, 4), dtype=complex)
        bad[0, 1] = 1.0
        with pytest.raises(NonHermitianInput):
            decompose_interaction(full_operator(bad, (2, 2)))

    @pytest.mark.parametrize("c", [0.0, 0.25, 0.5])
    def test_two_qubit_weighted_factor_sum(self, c):
        """sum_i tr(S^i rho_B) R^i equals tr_B{H_I (1 x rho_B)} = (1-2c)/2 S_z,
        which is invariant under the SVD's rotation freedom."""
        m = hb.two_qubit(c).model
        dec = decompose_interaction(m.hi)
        acc = sum(np.trace(s @ m.rho_b.mat) * r for r, s in dec.terms)
        expected = (1 - 2 * c) / 2 * 0.5 * SZ
        assert np.max(np.abs(acc - expected)) < 1e-12


class TestMarkovAssumptions:
    def test_maximally_mixed_bath_traceless_coupling(self):
        """rho_B = 1/d with traceless bath factors: the first moment is exactly zero."""
        m = make_model(np.zeros((2, 2)), np.diag([0.0, 1.0]), np.kron(SX, SX), np.eye(2) / 2, np.eye(2) / 2)
        dec = decompose_interaction(m.hi)
        rep = check_markov_assumptions(m, dec, 4.0, decay_threshold=0.5)
        assert rep.first_moment_max < 1e-14

    def test_diagonal_bath_state_is_stationary(self):
        rng = np.random.default_rng(3)
        w = rng.random(3) + 0.1
        m = make_model(
            random_hermitian(rng, 2),
            np.diag([0.0, 0.7, 1.9]),
            random_hermitian(rng, 6),
            np.eye(2) / 2,
            np.diag(w / w.sum()),
        )
        dec = decompose_interaction(m.hi)
        rep = check_markov_assumptions(m, dec, 5.0, decay_threshold=0.01)
        assert rep.stationarity_defect < 1e-13

    def test_two_qubit_correlator_never_decays(self):
        """Degenerate bath levels give a constant correlator; the report says so."""
        m = hb.two_qubit(0.25).model
        dec = decompose_interaction(m.hi)
        rep = check_markov_assumptions(m, dec, 5.0, decay_threshold=0.05)
        assert rep.decay_time is None
        assert not rep.passes["decay"]

    def test_dephasing_preset_passes_all(self):
        p = hb.dephasing_bath()
        dec = decompose_interaction(p.model.hi)
        rep = check_markov_assumptions(p.model, dec, 6.0, decay_threshold=0.025)
        assert rep.passes == {"first_moment": True, "stationarity": True, "decay": True}
        assert 3.0 < rep.decay_time < 5.0

    def test_first_moment_derivative_theorem(self):
        """Vanishing first moment forces its time derivative to vanish too."""
        p = hb.dephasing_bath()
        dec = decompose_interaction(p.model.hi)
        h = 1e-6
        for t in (0.0, 1.3, 4.0):
            d = (first_moment(p.model, dec, 0, t + h) - first_moment(p.model, dec, 0, t - h)) / (2 * h)
            assert abs(d) < 1e-8


class TestBohr:
    def test_trivial_h0(self):
        rng = np.random.default_rng(4)
        r = random_hermitian(rng, 2)
        comps = bohr_decomposition(r, np.zeros((2, 2)))
        assert len(comps) == 1
        w, a = comps[0]
        assert w == 0.0
        assert np.allclose(a, r)

    def test_two_level_splitting(self):
        delta = 1.7
        comps = bohr_decomposition(SX, np.diag([0.0, delta]))
        freqs = sorted(w for w, _ in comps)
        assert np.allclose(freqs, [-delta, delta])
        for w, a in comps:
            if w > 0:
                assert np.allclose(a, [[0, 1], [0, 0]])  # raising part: e^{i delta t}|0><1|
            else:
                assert np.allclose(a, [[0, 0], [1, 0]])

    def test_reconstruction_random(self):
        rng = np.random.default_rng(5)
        h0 = random_hermitian(rng, 3)
        r = random_hermitian(rng, 3)
        m = make_model(h0, np.zeros((2, 2)), np.zeros((6, 6)), np.eye(3) / 3, np.eye(2) / 2)
        fr = frame_of(m)
        comps = bohr_decomposition(r, h0)
        bd = BohrDecomposition(
            tuple(sorted(w for w, _ in comps)), {(0, w): a for w, a in comps}
        )
        eps = np.linalg.eigvalsh(h0)
        w_min = min(abs(a - b) for i, a in enumerate(eps) for b in eps[i + 1 :])
        for t in np.linspace(0, 2 * np.pi / w_min, 10):
            u = fr.u0(t)
            target = u @ r @ u.conj().T
            assert np.max(np.abs(reconstruct_bohr(bd, 0, t) - target)) < 1e-10

    def test_hermitian_coupling_has_conjugate_lines(self):
        rng = np.random.default_rng(6)
        h0 = random_hermitian(rng, 3)
        r = random_hermitian(rng, 3)
        comps = dict(bohr_decomposition(r, h0))
        for w, a in comps.items():
            partner = comps[min(comps, key=lambda x: abs(x + w))]
            assert np.max(np.abs(a.conj().T - partner)) < 1e-10


class TestSpectralCoefficients:
    def _two_level_bath(self, omega_b, rho00=1.0):
        return make_model(
            np.zeros((2, 2)),
            np.diag([0.0, omega_b]),
            np.kron(SZ, SX),
            np.eye(2) / 2,
            np.diag([rho00, 1 - rho00]),
        )

    def test_zero_correlator(self):
        """Coupling supported on the unoccupied level gives J = 0."""
        m = make_model(
            np.zeros((2, 2)),
            np.diag([0.0, 1.0]),
            np.kron(SZ, np.diag([0.0, 1.0])),
            np.eye(2) / 2,
            np.diag([1.0, 0.0]),
        )
        dec = decompose_interaction(m.hi)
        assert abs(bath_correlation(m, dec, 0, 0, 0.0, 1.3)) < 1e-14
        sc = spectral_coefficients(m, dec, [0.0], horizon=10.0, tol=1e-8)
        assert abs(sc.j[(0, 0, 0.0)]) < 1e-10
        assert sc.converged

    @pytest.mark.parametrize("eta", [0.5, 0.25])
    def test_single_mode_analytic(self, eta):
        """C(tau) = C0 exp(-i Omega tau) with regulator: J = C0/(eta + i(omega + Omega))."""
        omega_b = 1.9
        m = self._two_level_bath(omega_b)
        dec = decompose_interaction(m.hi)
        c0 = bath_correlation(m, dec, 0, 0, 0.0, 0.0)
        # here C(tau) = c0 * exp(+i omega_b tau), i.e. Omega = -omega_b
        horizon = 60.0 / eta
        sc = spectral_coefficients(m, dec, [0.4, -0.8], horizon=horizon, tol=1e-6, eta=eta)
        for w in (0.4, -0.8):
            expected = c0 / (eta + 1j * (w - omega_b))
            assert abs(sc.j[(0, 0, w)] - expected) < 1e-6

    def test_eta_to_zero_limit_real_part(self):
        omega_b = 1.9
        m = self._two_level_bath(omega_b)
        dec = decompose_interaction(m.hi)
        c0 = bath_correlation(m, dec, 0, 0, 0.0, 0.0).real
        w = 0.4
        for eta in (0.4, 0.2, 0.1):
            sc = spectral_coefficients(m, dec, [w], horizon=80.0 / eta, tol=1e-5, eta=eta)
            analytic = c0 * eta / (eta**2 + (w - omega_b) ** 2)
            assert abs(sc.j[(0, 0, w)].real - analytic) < 1e-5

    def test_strict_mode_raises_on_nonconvergence(self):
        m = hb.two_qubit(0.25).model  # constant correlator never converges
        dec = decompose_interaction(m.hi)
        with pytest.raises(NonConvergent):
            spectral_coefficients(m, dec, [0.0], horizon=5.0, tol=1e-10, strict=True)


class TestLindbladRHS:
    def _artificial(self, jval, delta=1.3):
        bd = BohrDecomposition((0.0,), {(0, 0.0): SZ.copy()})
        sc = SpectralCoefficients({(0, 0, 0.0): jval}, 10.0, 1e-8, 0.0, {(0, 0, 0.0): 0.0}, True)
        h0 = 0.5 * delta * SZ
        return bd, sc, h0

    def test_identity_is_fixed_point(self):
        bd, sc, h0 = self._artificial(0.05 + 0.02j)
        out = lindblad_rhs(np.eye(2), bd, sc, h0, Constants(1.0, 0.3))
        assert np.max(np.abs(out)) < 1e-15

    def test_zero_spectral_coefficients_give_free_motion(self):
        bd, sc, h0 = self._artificial(0.0)
        rng = np.random.default_rng(7)
        o = random_hermitian(rng, 2)
        out = lindblad_rhs(o, bd, sc, h0, Constants(1.0, 0.3))
        assert np.allclose(out, 1j * (h0 @ o - o @ h0))

    def test_hermiticity_preserved(self):
        bd, sc, h0 = self._artificial(0.05 + 0.02j)
        rng = np.random.default_rng(8)
        o = random_hermitian(rng, 2)
        out = lindblad_rhs(o, bd, sc, h0, Constants(1.0, 0.3))
        assert np.max(np.abs(out - out.conj().T)) < 1e-10

    def test_strict_paper_form_breaks_identity_fixity(self):
        bd, sc, h0 = self._artificial(0.05 + 0.02j)
        out = lindblad_rhs(np.eye(2), bd, sc, h0, Constants(1.0, 0.3), strict_paper=True)
        assert np.max(np.abs(out)) > 0.1  # bare H0 O term survives

    def test_dephasing_rate_by_hand(self):
        """For sigma_z dephasing the coherence decays at 4 (lam/hbar)^2 Re J(0)."""
        jval = 0.05 + 0.02j
        lam = 0.3
        bd, sc, h0 = self._artificial(jval)
        out = lindblad_rhs(np.array([[0, 1], [0, 0]], dtype=complex), bd, sc, h0, Constants(1.0, lam))
        # d/dt sigma+ = (i delta) sigma+ - 4 lam^2 Re J sigma+
        coeff = out[0, 1]
        assert coeff == pytest.approx(1j * 1.3 - 4 * lam**2 * jval.real, abs=1e-14)


class TestEvolveLindblad:
    def test_identity_stays_identity(self):
        bd = BohrDecomposition((0.0,), {(0, 0.0): SZ.copy()})
        sc = SpectralCoefficients({(0, 0, 0.0): 0.05 + 0.02j}, 10.0, 1e-8, 0.0, {(0, 0, 0.0): 0.0}, True)
        traj = evolve_lindblad(np.eye(2), bd, sc, 0.5 * SZ, Constants(1.0, 0.3), TimeGrid.linspace(4.0, 9))
        assert np.max(np.abs(traj - np.eye(2))) < 1e-10

    def test_zero_j_is_phase_rotation(self):
        delta = 1.3
        bd = BohrDecomposition((0.0,), {(0, 0.0): SZ.copy()})
        sc = SpectralCoefficients({(0, 0, 0.0): 0.0}, 10.0, 1e-8, 0.0, {(0, 0, 0.0): 0.0}, True)
        grid = TimeGrid.linspace(3.0, 7)
        traj = evolve_lindblad(SX, bd, sc, 0.5 * delta * SZ, Constants(1.0, 0.3), grid)
        for t, val in zip(grid.points, traj):
            assert val[0, 1] == pytest.approx(np.exp(1j * delta * t), abs=1e-9)

    def test_dephasing_decay_rate(self):
        jval = 0.05 + 0.02j
        lam = 0.3
        gamma = 4 * lam**2 * jval.real
        bd = BohrDecomposition((0.0,), {(0, 0.0): SZ.copy()})
        sc = SpectralCoefficients({(0, 0, 0.0): jval}, 10.0, 1e-8, 0.0, {(0, 0, 0.0): 0.0}, True)
        grid = TimeGrid.linspace(5.0, 11)
        traj = evolve_lindblad(SX, bd, sc, 0.5 * 1.3 * SZ, Constants(1.0, lam), grid)
        for t, val in zip(grid.points, traj):
            assert abs(val[0, 1]) == pytest.approx(np.exp(-gamma * t), abs=1e-9)


class TestGeneratorAgreement:
    def test_dephasing_preset_matches_one_point_rhs(self):
        """The adjoint generator equals the order-2 local RHS within the
        assumption-defect bound, both at matched and mismatched horizons."""
        p = hb.dephasing_bath(lam=0.05)
        m = p.model
        dec = decompose_interaction(m.hi)
        rep = check_markov_assumptions(m, dec, 6.0, decay_threshold=0.025)
        bd = bohr_decompose_all(dec, m.h0.mat, m.constants.hbar)
        lam = m.constants.lam
        grid = TimeGrid.linspace(5.0, 11)
        ks = compute_kernels(m, 2, grid)
        traj = one_point_operator(
            p.observables["sx"], SeriesTruncation(2, lam), ks, m.rho_b, grid, "sx"
        )

        for t_eval, j_horizon in ((5.0, 5.0), (4.0, 6.0)):
            sc = spectral_coefficients(m, dec, bd.frequencies, horizon=j_horizon, tol=0.2)
            from heisenbath.superop import trajectory_value

            o_val = trajectory_value(traj, ks, m.rho_b, t_eval)
            pert = one_point_rhs(traj, t_eval, ks, m.rho_b).mat
            lind = lindblad_rhs(o_val, bd, sc, m.h0.mat, m.constants)
            diff = np.max(np.abs(pert - lind))
            bound = rep.rhs_defect_bound(
                float(np.linalg.norm(o_val, 2)), t_eval, lam, 1.0, j_horizon=j_horizon
            )
            assert diff <= bound
