import numpy as np
import pytest

from lcemul.energy import PhysParams, State
from lcemul.grid import ScalarField, VectorField2


def drop_phi(grid, radius=0.5, width=0.01):
    X, Y = grid.meshgrid()
    r = np.sqrt(X * X + Y * Y)
    return 1.0 - (0.5 - 0.5 * np.tanh((r - radius) / width))


def drop_state(grid, radius=0.5, width=0.01, d0=(0.0, 0.95), zero_mu_h=True):
    """Benchmark-style initial state: polymer drop in the LC phase."""
    state = State(
        t=0.0,
        phi=ScalarField(grid, drop_phi(grid, radius, width)),
        d=VectorField2.constant(grid, *d0),
        mu=ScalarField.zeros(grid) if zero_mu_h else None,
        h=VectorField2.zeros(grid) if zero_mu_h else None,
    )
    return state


@pytest.fixture(scope="session")
def bench_params():
    """The drop-benchmark parameter set (quartic potential)."""
    return PhysParams(eps=0.1, alpha=10.0, beta=1.0, kappa=0.1, phi_cr=0.5)


@pytest.fixture(scope="session")
def fig2_params():
    """Logarithmic-potential landscape parameters of the two-well figure."""
    from lcemul.energy import Potential

    return PhysParams(eps=0.05, alpha=15.0, beta=1.0, kappa=0.1, phi_cr=0.0,
                      theta_fh=1.5, theta0_fh=3.0, potential=Potential.FLORY_HUGGINS)
