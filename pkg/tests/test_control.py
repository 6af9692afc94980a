"""Tests for the stochastic-control layer."""

import numpy as np
import pytest

from singular_bsde import (
    DomainError,
    Grid,
    McConfig,
    conditional_probability_bound,
    cost_identity_check,
    optimal_control_path,
    simulate_path,
    solve_un,
    solve_vbar,
    value_function,
)
from singular_bsde.control import _alternative_costs
from singular_bsde.model import _y


@pytest.fixture(scope="module")
def field_outside(params_outside):
    grid = Grid(params_outside, nx=119, nt=800)
    return solve_un(4096, grid, grade_last=24)


@pytest.fixture(scope="module")
def field_inside(params_inside):
    grid = Grid(params_inside, nx=79, nt=400)
    return solve_vbar(grid)


def test_value_function(params_outside):
    p = params_outside.p
    assert value_function(2.0, 0.5, params_outside) == pytest.approx(
        2.0**p * 0.5)
    assert value_function(-2.0, 0.5, params_outside) == pytest.approx(
        2.0**p * 0.5)
    with pytest.raises(DomainError):
        value_function(1.0, -0.1, params_outside)


def test_alternative_costs_closed_form(params_outside):
    # the constant-rate liquidation cost equals y_{t0} |c|^p: with
    # q - 1 = 1/(p - 1) the two prefactors coincide
    const, bang = _alternative_costs(1.0, 0.0, params_outside)
    assert const == pytest.approx(_y(0.0, params_outside))
    assert bang > const
    # waiting half the window at rate zero doubles nothing but shortens
    # the liquidation window, so bang-bang costs 2^{p-1} as much
    assert bang / const == pytest.approx(2.0 ** (params_outside.p - 1.0))


def test_optimal_control_path_structure(params_outside, field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.005, seed=21)
    path = simulate_path(1.5, 0.0, field_outside, params_outside, cfg)
    state = optimal_control_path(path, c=2.0, params=params_outside)
    assert state.C[0] == 2.0
    # the position decays monotonically under the feedback and the
    # control always pushes it toward zero
    assert np.all(np.diff(state.C) <= 1e-15)
    assert np.all(state.alpha <= 0.0)
    assert np.allclose(state.alpha,
                       -(params_outside.q - 1.0)
                       * path.y ** (params_outside.q - 1.0) * state.C)


def test_exited_position_liquidates(params_outside, field_outside):
    # on a path that exits, Y runs along the blow-up curve afterwards and
    # the closed-form position C pushes toward zero at T
    cfg = McConfig(n_paths=1, dt_sim=0.002, seed=23)
    for i in range(300):
        path = simulate_path(1.5, 0.0, field_outside, params_outside, cfg,
                             path_index=i)
        if path.tau_index is not None and not path.clamped:
            state = optimal_control_path(path, c=1.0, params=params_outside)
            assert state.C[-1] < 0.05 * abs(state.C[0])
            return
    pytest.fail("no exited path found")


def test_cost_identity_outside(params_outside, field_outside):
    cfg = McConfig(n_paths=50_000, dt_sim=0.002, seed=25)
    rep = cost_identity_check(1.5, field_outside, params_outside, cfg)
    tol = 3.0 * rep.right_se + 1e-2
    assert abs(rep.left - rep.right_mean) < tol
    assert rep.n_infinite == 0
    # the optimal cost undercuts both reference controls
    assert rep.right_mean < rep.constant_rate_cost
    assert rep.right_mean < rep.bang_bang_cost


def test_cost_identity_inside(params_inside, field_inside):
    cfg = McConfig(n_paths=50_000, dt_sim=0.002, seed=27)
    rep = cost_identity_check(1.0, field_inside, params_inside, cfg)
    tol = 3.0 * rep.right_se + 1e-2
    assert abs(rep.left - rep.right_mean) < tol
    # surviving paths carry xi = infinity; their position must have
    # liquidated below the floor or the identity would be vacuous
    assert rep.n_infinite == 0


def test_cost_identity_validation(params_outside, field_outside):
    cfg = McConfig(n_paths=10, dt_sim=0.01, seed=1)
    with pytest.raises(DomainError):
        cost_identity_check(0.0, field_outside, params_outside, cfg)
    with pytest.raises(DomainError):
        cost_identity_check(1.0, field_outside, params_outside, cfg,
                            t0=params_outside.T)


def test_probability_bound_outside(params_outside, field_outside):
    cfg = McConfig(n_paths=50_000, dt_sim=0.005, seed=29)
    rep = conditional_probability_bound(1.5, 0.0, field_outside,
                                        params_outside, cfg)
    assert rep.mc_prob <= rep.bound + 3.0 * rep.std_error
    assert rep.ratio < 1.0


def test_probability_bound_inside(params_inside, field_inside):
    cfg = McConfig(n_paths=50_000, dt_sim=0.005, seed=31)
    rep = conditional_probability_bound(1.0, 0.0, field_inside,
                                        params_inside, cfg)
    assert rep.mc_prob <= rep.bound + 3.0 * rep.std_error
    assert rep.ratio < 1.0
