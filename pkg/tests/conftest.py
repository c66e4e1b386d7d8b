import numpy as np
import pytest

from sbscatter.hamiltonian import ModelParams, assemble_full
from sbscatter.modes import RadialGrid, default_r_max
from sbscatter.spectral import ResolventForm, eigen_resonances

R_MIN = 1e-3


def graded_grid(M):
    """Graded grid; small M falls back to plain Gauss-Legendre."""
    if M < 18:
        return RadialGrid.gauss_legendre(R_MIN, default_r_max(1.0), M)
    return RadialGrid.graded(R_MIN, default_r_max(1.0), M)


def model(M=81, N_max=2, g=0.1, **kw):
    return ModelParams(graded_grid(M), g=g, N_max=N_max, **kw)


class Desk:
    """Model, resonance data, dilated Hamiltonian and its u-form."""

    def __init__(self, p):
        self.p = p
        self.rd = eigen_resonances(p)
        self.H = assemble_full(p)
        self.form = ResolventForm(self.H, self.rd.phi)


@pytest.fixture(scope="session")
def desk():
    """Desk model: 81 graded modes, at most two bosons, g = 0.1, theta = 0.15i."""
    return Desk(model())


@pytest.fixture(scope="session")
def desk_g005():
    return Desk(model(g=0.05))


@pytest.fixture(scope="session")
def small():
    """Small model with one boson, used where many solves are needed."""
    return Desk(model(M=40, N_max=1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
