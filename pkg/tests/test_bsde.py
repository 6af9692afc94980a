"""Tests for backward-pair sample paths and the pathwise identity defect."""

import numpy as np
import pytest

from singular_bsde import (
    DomainError,
    Grid,
    McConfig,
    bsde_residual,
    minimality_probe,
    residual_rms,
    simulate_path,
    solve_un,
    solve_vbar,
    terminal_statistics,
)
from singular_bsde.bsde import path_rng
from singular_bsde.model import _y


@pytest.fixture(scope="module")
def field_outside(params_outside):
    grid = Grid(params_outside, nx=119, nt=800)
    return solve_un(4096, grid, grade_last=24)


@pytest.fixture(scope="module")
def field_inside(params_inside):
    grid = Grid(params_inside, nx=79, nt=400)
    return solve_vbar(grid)


def test_path_rng_reproducible():
    a = path_rng(1, 5).standard_normal(3)
    b = path_rng(1, 5).standard_normal(3)
    c = path_rng(1, 6).standard_normal(3)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_simulate_path_shapes_and_start(params_outside, field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.01, seed=2)
    p = simulate_path(1.5, 0.0, field_outside, params_outside, cfg)
    n = len(p.times)
    assert p.w.shape == p.y.shape == p.z.shape == (n,)
    assert p.times[0] == 0.0 and p.times[-1] == params_outside.T
    assert p.w[0] == 1.5
    assert p.y[0] == pytest.approx(field_outside.interp(1.5, 0.0))


def test_simulate_path_validation(params_outside, field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.01, seed=2)
    with pytest.raises(DomainError):
        simulate_path(0.0, 0.0, field_outside, params_outside, cfg)
    with pytest.raises(DomainError):
        simulate_path(1.5, params_outside.T, field_outside, params_outside,
                      cfg)


def test_exited_path_follows_blowup_continuation(params_outside,
                                                 field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.01, seed=2)
    found = False
    for i in range(200):
        p = simulate_path(1.5, 0.0, field_outside, params_outside, cfg,
                          path_index=i)
        if p.tau_index is None or p.clamped:
            continue
        found = True
        cut = p.tau_index + 1
        assert np.array_equal(p.y[cut:-1], _y(p.times[cut:-1], params_outside))
        assert np.all(p.z[cut:] == 0.0)
        # Y increases toward the blow-up after the exit
        assert np.all(np.diff(p.y[cut:]) >= 0.0)
        break
    assert found


def test_exited_path_inside_regime_drops_to_zero(params_inside, field_inside):
    cfg = McConfig(n_paths=1, dt_sim=0.01, seed=4)
    found = False
    for i in range(200):
        p = simulate_path(1.0, 0.0, field_inside, params_inside, cfg,
                          path_index=i)
        if p.tau_index is None:
            continue
        found = True
        cut = p.tau_index + 1
        assert np.all(p.y[cut:] == 0.0)
        assert np.all(p.z[cut:] == 0.0)
        break
    assert found


def test_residual_report_consistency(params_outside, field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.005, seed=6)
    p = simulate_path(1.5, 0.0, field_outside, params_outside, cfg)
    rep = bsde_residual(p, 0, 40, params_outside)
    assert rep.residual == pytest.approx(
        abs(rep.dy + rep.driver_term + rep.martingale_term))
    with pytest.raises(DomainError):
        bsde_residual(p, 40, 40, params_outside)


def test_residual_rms_shrinks_with_dt(params_outside, field_outside):
    # halving the step should cut the RMS defect by roughly sqrt(2)
    def rms(dt_sim, n_paths=400):
        cfg = McConfig(n_paths=n_paths, dt_sim=dt_sim, seed=8)
        paths = [simulate_path(1.5, 0.0, field_outside, params_outside, cfg,
                               path_index=i) for i in range(n_paths)]
        k_hi = int(round(0.9 * params_outside.T / dt_sim))
        return residual_rms(paths, 0, k_hi, params_outside.q)

    coarse = rms(0.008)
    fine = rms(0.002)
    assert fine < coarse
    assert coarse / fine > 1.3


def test_terminal_statistics(params_outside, field_outside):
    cfg = McConfig(n_paths=1, dt_sim=0.01, seed=10)
    paths = [simulate_path(1.5, 0.0, field_outside, params_outside, cfg,
                           path_index=i) for i in range(100)]
    stats = terminal_statistics(paths, params_outside)
    assert stats.n_paths == 100
    assert stats.n_exited + sum(1 for p in paths if p.tau_index is None) == 100
    assert stats.exit_fraction == stats.n_exited / 100
    assert stats.terminal_tracks_continuation
    # exited paths end at the capped blow-up value, far above survivors
    if stats.n_exited:
        assert stats.max_terminal_y_exited > stats.max_terminal_y_surviving


def test_minimality_probe(params_outside, grid_outside):
    vals = minimality_probe(1.0, 0.5, [4, 8, 16, 32], params_outside,
                            grid_outside)
    seq = [vals[n] for n in (4, 8, 16, 32)]
    assert all(b >= a for a, b in zip(seq, seq[1:]))
    gaps = np.diff(seq)
    assert gaps[-1] < gaps[0]


def test_minimality_probe_regime_guard(params_inside, grid_inside):
    with pytest.raises(DomainError):
        minimality_probe(1.0, 0.5, [4, 8], params_inside, grid_inside)
