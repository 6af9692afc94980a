import pytest

from singular_bsde import Grid, ProblemParams, Regime


@pytest.fixture(scope="session")
def params_outside():
    return ProblemParams(q=3.0, L=3.0, T=1.0, regime=Regime.OUTSIDE_BALL)


@pytest.fixture(scope="session")
def params_inside():
    return ProblemParams(q=2.0, L=2.0, T=1.0, regime=Regime.INSIDE_BALL)


@pytest.fixture(scope="session")
def grid_outside(params_outside):
    # the reference display steps: dx = 0.1, dt = 0.01
    return Grid(params_outside, nx=29, nt=100)


@pytest.fixture(scope="session")
def grid_inside(params_inside):
    return Grid(params_inside, nx=19, nt=100)
