import math

import numpy as np
import pytest

from singular_bsde import (
    BoundaryIndices,
    DomainError,
    ProblemParams,
    Regime,
    blowup_solution,
    holder_conjugate,
    mollifier,
    psi_mn,
    shifted_bound,
    shifted_solution,
)


def test_holder_conjugate():
    assert holder_conjugate(2.0) == 2.0
    p = holder_conjugate(3.0)
    assert math.isclose(1.0 / p + 1.0 / 3.0, 1.0)
    with pytest.raises(DomainError):
        holder_conjugate(1.0)


def test_params_validation():
    with pytest.raises(DomainError):
        ProblemParams(q=2.0, L=3.0, T=1.0, regime=Regime.OUTSIDE_BALL)
    with pytest.raises(DomainError):
        ProblemParams(q=0.9, L=3.0, T=1.0, regime=Regime.INSIDE_BALL)
    with pytest.raises(DomainError):
        ProblemParams(q=3.0, L=-1.0, T=1.0, regime=Regime.OUTSIDE_BALL)
    p = ProblemParams(q=3.0, L=3.0, T=1.0, regime=Regime.OUTSIDE_BALL)
    assert p.p == holder_conjugate(3.0)


def test_blowup_solution_values(params_outside):
    # q = 3 gives p = 3/2 and y_t = (2(T-t))^(-1/2)
    assert math.isclose(blowup_solution(0.0, params_outside), 2.0**-0.5)
    assert math.isclose(blowup_solution(0.5, params_outside), 1.0)
    with pytest.raises(DomainError):
        blowup_solution(1.0, params_outside)
    with pytest.raises(DomainError):
        blowup_solution(-0.1, params_outside)


def test_blowup_solution_increasing(params_outside):
    ts = np.linspace(0.0, 0.999, 50)
    ys = [blowup_solution(t, params_outside) for t in ts]
    assert np.all(np.diff(ys) > 0)


def test_blowup_solves_ode(params_outside):
    # dy/dt = y^q along the curve
    h = 1e-6
    for t in (0.1, 0.5, 0.9):
        lhs = (blowup_solution(t + h, params_outside)
               - blowup_solution(t - h, params_outside)) / (2 * h)
        rhs = blowup_solution(t, params_outside) ** params_outside.q
        assert math.isclose(lhs, rhs, rel_tol=1e-6)


def test_shifted_solution_and_bound(params_outside):
    n = 10
    for t in (0.0, 0.5, 1.0):
        val = shifted_solution(t, n, params_outside)
        assert val <= shifted_bound(n, params_outside) + 1e-15
    assert math.isclose(shifted_solution(1.0, n, params_outside),
                        shifted_bound(n, params_outside))


def test_mollifier_endpoints_and_monotone():
    assert mollifier(-1.0) == 1.0
    assert mollifier(0.0) == 1.0
    assert mollifier(1.0) == 0.0
    assert mollifier(2.0) == 0.0
    assert math.isclose(mollifier(0.5), 0.5, abs_tol=1e-12)
    xs = np.linspace(0.0, 1.0, 21)
    vals = [mollifier(x) for x in xs]
    assert np.all(np.diff(vals) < 0)


def test_psi_boundary_values(params_outside):
    idx = BoundaryIndices(m=8, n=5)
    for t in (0.0, 0.5, 1.0):
        want = shifted_solution(t, 5, params_outside)
        assert math.isclose(psi_mn(0.0, t, idx, params_outside), want)
        assert math.isclose(psi_mn(params_outside.L, t, idx, params_outside),
                            want)


def test_psi_vanishes_in_the_middle(params_outside):
    idx = BoundaryIndices(m=8, n=5)
    for x in np.linspace(1.0 / 8, params_outside.L - 1.0 / 8, 9):
        assert psi_mn(float(x), 0.5, idx, params_outside) == 0.0


def test_psi_monotone_in_m_and_n(params_outside):
    xs = np.linspace(0.0, params_outside.L, 61)
    t = 0.5
    v_m8 = np.array([psi_mn(float(x), t, BoundaryIndices(8, 5),
                            params_outside) for x in xs])
    v_m16 = np.array([psi_mn(float(x), t, BoundaryIndices(16, 5),
                             params_outside) for x in xs])
    v_n10 = np.array([psi_mn(float(x), t, BoundaryIndices(8, 10),
                             params_outside) for x in xs])
    assert np.all(v_m16 <= v_m8 + 1e-12)
    assert np.all(v_n10 >= v_m8 - 1e-12)
    assert np.all(v_m8 >= 0.0)


def test_psi_rejects_small_m(params_outside):
    with pytest.raises(DomainError):
        psi_mn(1.0, 0.5, BoundaryIndices(m=1, n=5), params_outside)
