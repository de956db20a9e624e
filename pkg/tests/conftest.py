import numpy as np
import pytest

from fremond.grid import Field, Grid
from fremond.potential import Potential
from fremond.stepper import SchemeConfig, initial_state, simulate


@pytest.fixture(scope="session")
def double_well():
    return Potential.double_well()


@pytest.fixture(scope="session")
def steady_pair(double_well):
    """Uniform steady state of the eps=0 system: theta* = F'(phi*) > 0."""
    phi_star = 1.1
    theta_star = double_well.eval(phi_star, 1)
    return phi_star, theta_star


def cosine_initial(grid, theta_base=1.0, theta_amp=0.2, phi_amp=0.3):
    (x,) = grid.meshgrid()
    mode = np.cos(np.pi * x / grid.extent[0])
    return initial_state(grid, Field(grid, theta_base + theta_amp * mode), Field(grid, phi_amp * mode))


@pytest.fixture(scope="session")
def small_cosine_run(double_well):
    """Short coupled run on a coarse grid, shared by the diagnostic tests."""
    grid = Grid.line(32)
    dt = grid.h[0] ** 2 / 2
    cfg = SchemeConfig(dt=dt, kappa=1.0, epsilon=1e-3, p=4.0)
    init = cosine_initial(grid)
    traj = simulate(init, cfg, double_well, 64 * dt)
    return traj, double_well
