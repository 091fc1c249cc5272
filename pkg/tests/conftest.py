import numpy as np
import pytest

from sulfsim import Grid1D, PhysicalParams, SimConfig


@pytest.fixture(scope="session")
def default_params():
    return PhysicalParams(lam=1.0, c0=1.0, phi0=0.3, phi1=0.7, phi_bar=2.0, s0=1.0)


@pytest.fixture
def small_config():
    """Quick full-physics config: 200 particles, 100 steps."""
    return SimConfig(
        particles=200,
        horizon=0.1,
        step=1e-3,
        seed=1234,
        grid=Grid1D(-10.0, 10.0, 0.05),
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
