"""Shipped example models.

``two_qubit``: two spin-1/2 particles coupled by the exchange interaction
``lambda * S1 . S2``, the second spin playing the bath with state
``diag(1 - c, c)``.  Solvable in closed form, so it anchors most of the
regression values.

``dephasing_bath``: a qubit coupled through ``sigma_z`` to an 8-level bath
engineered to satisfy the Markov assumptions (zero first moment, exactly
stationary correlations, correlation decay well inside the horizon), the
workhorse for the Lindblad-limit checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, make_model

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class Preset:
    name: str
    model: ModelSpec
    observables: dict


def two_qubit(c: float = 0.25, lam: float = 0.1, hbar: float = 1.0) -> Preset:
    """Exchange-coupled qubit pair; ``c`` is the bath spin-down weight."""
    if not 0.0 <= c <= 1.0:
        raise ValueError(f"c must lie in [0, 1], got {c}")
    spin = [hbar / 2 * s for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)]
    hi = sum(np.kron(s, s) for s in spin)
    model = make_model(
        h0=np.zeros((2, 2)),
        hb=np.zeros((2, 2)),
        hi=hi,
        rho0=np.eye(2) / 2,
        rho_b=np.diag([1.0 - c, c]),
        hbar=hbar,
        lam=lam,
    )
    obs = {
        "s1x": spin[0],
        "s1y": spin[1],
        "s1z": spin[2],
    }
    return Preset("two_qubit", model, obs)


def dephasing_bath(lam: float = 0.05, hbar: float = 1.0, splitting: float = 1.3) -> Preset:
    """Qubit dephasing against an 8-level bath engineered for clean decay.

    ``H_I = sigma_z (x) B`` where ``B`` couples the bath ground level to the
    7 excited levels (a star graph) with a Hann taper, so the correlation
    function is a one-sided, smoothly windowed frequency comb: it decays
    below 2% of its initial value by ``tau ~ 4.2`` and stays there until the
    comb recurrence near ``tau ~ 12.6``.  ``B`` has zero diagonal, so the
    first moment vanishes for the (diagonal, thermal) bath state, and a
    diagonal bath state makes the correlations exactly stationary.
    """
    d_b = 8
    nu0, dnu = 1.0, 0.5
    energies = np.concatenate([[0.0], nu0 + dnu * np.arange(d_b - 1)])
    b = np.zeros((d_b, d_b))
    for g in range(1, d_b):
        b[0, g] = b[g, 0] = np.sin(np.pi * g / d_b) ** 2
    beta = 0.35
    weights = np.exp(-beta * energies)
    rho_b = np.diag(weights / weights.sum())
    model = make_model(
        h0=0.5 * splitting * SIGMA_Z,
        hb=np.diag(energies),
        hi=np.kron(SIGMA_Z, b),
        rho0=np.eye(2) / 2,
        rho_b=rho_b,
        hbar=hbar,
        lam=lam,
    )
    obs = {
        "sx": SIGMA_X.copy(),
        "sy": SIGMA_Y.copy(),
        "sz": SIGMA_Z.copy(),
    }
    return Preset("dephasing_bath", model, obs)


PRESETS = {
    "two_qubit": two_qubit,
    "dephasing_bath": dephasing_bath,
}
