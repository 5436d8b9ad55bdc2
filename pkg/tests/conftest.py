import pytest

import heisenbath as hb
from heisenbath.dyson import compute_kernels
from heisenbath.spaces import TimeGrid


@pytest.fixture(scope="session")
def two_qubit_quarter():
    """Two-qubit preset at c = 1/4 with order-3 kernels over [0, 2]."""
    preset = hb.two_qubit(0.25, lam=0.1)
    ks = compute_kernels(preset.model, 3, TimeGrid.linspace(2.0, 9))
    return preset, ks


@pytest.fixture(scope="session")
def random_model_2x3():
    """Seeded random d_S=2, d_B=3 model with order-3 kernels over [0, 1.65]."""
    from heisenbath.diagnostics import random_model

    m, obs = random_model(42, 2, 3)
    ks = compute_kernels(m, 3, TimeGrid.linspace(1.65, 7))
    return m, obs, ks
