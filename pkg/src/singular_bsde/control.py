"""Stochastic-control layer: value function, optimal feedback control,
the cost identity, and the conditional-probability decay bound.

The controlled position is C_u = c + int_t^u alpha_s ds and the cost is

    E[ (p-1)^{p-1} int_t^T |alpha_s|^p ds + xi |C_T|^p ],

minimized by the feedback alpha*_s = -(q-1) C_s Y_s^{q-1}, whose closed
form is C*_u = c exp(-(q-1) int_t^u Y_s^{q-1} ds).  Along the optimal
control the running cost density simplifies algebraically:

    (p-1)^{p-1} |alpha*_s|^p = (q-1) (C*_s)^p Y_s^q,

which is the form the Monte Carlo accumulates.  On exited paths in the
outside-ball regime Y continues as the deterministic blow-up curve, and
everything after tau has a closed form: C*_s = C*_tau (T-s)/(T-tau), the
remaining running cost equals y_tau (C*_tau)^p exactly, and C*_T = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .model import DomainError, ProblemParams, Regime, _y
from .feynman_kac import McConfig, simulate_exit_chunk, _chunk_sizes, \
    _n_workers
from concurrent.futures import ThreadPoolExecutor


def value_function(c: float, y_t: float, params: ProblemParams) -> float:
    """V(c, t) = |c|^p Y_t."""
    if y_t < 0.0:
        raise DomainError(f"Y_t must be nonnegative, got {y_t}")
    return abs(c) ** params.p * y_t


@dataclass(frozen=True)
class ControlState:
    c: float
    t: float
    times: np.ndarray
    alpha: np.ndarray
    C: np.ndarray


def optimal_control_path(path, c: float, params: ProblemParams) -> ControlState:
    """Optimal control along a simulated (W, Y, Z) path, via the
    exponential closed form with a trapezoid exponent."""
    q = params.q
    rate = (q - 1.0) * path.y ** (q - 1.0)
    dt = path.times[1] - path.times[0]
    expo = np.concatenate([[0.0], np.cumsum(0.5 * dt * (rate[:-1] + rate[1:]))])
    C = c * np.exp(-expo)
    alpha = -rate * C
    return ControlState(c=c, t=float(path.times[0]), times=path.times,
                        alpha=alpha, C=C)


@dataclass(frozen=True)
class CostIdentityReport:
    left: float            # Y_t |c|^p from the solved field
    right_mean: float      # MC estimate of the cost functional
    right_se: float
    n_paths: int
    n_infinite: int        # surviving inside-regime paths whose C_T did not
    # decay below the liquidation floor; their xi |C_T|^p term is +infinity
    # and is reported rather than averaged
    constant_rate_cost: float
    bang_bang_cost: float


def _alternative_costs(c: float, t0: float, params: ProblemParams):
    """Closed-form expected costs of two admissible reference controls.

    Constant rate alpha = -c/(T-t) liquidates linearly, so C_T = 0 and the
    cost is deterministic; the bang-bang control waits until the midpoint
    and then liquidates at constant rate, paying the same formula on half
    the window.  Both dominate the optimal cost for every terminal data.
    """
    p = params.p
    span = params.T - t0
    const_rate = (p - 1.0) ** (p - 1.0) * span ** (1.0 - p) * abs(c) ** p
    bang_bang = (p - 1.0) ** (p - 1.0) * (0.5 * span) ** (1.0 - p) * abs(c) ** p
    return const_rate, bang_bang


def cost_identity_check(x0: float, field, params: ProblemParams,
                        cfg: McConfig, t0: float = 0.0,
                        c: float = 1.0) -> CostIdentityReport:
    """Monte Carlo check of Y_t C_t^p = E[(p-1)^{p-1} int |alpha*|^p + xi C_T^p].

    xi C_T^p contributes 0 on the xi-finite path class; on the xi-infinite
    class it is 0 exactly in the continuum (C_T = 0) and below a floor of
    order dt at finite resolution, with violators counted as n_infinite.
    """
    L, T, q, p = params.L, params.T, params.q, params.p
    if not (0.0 < x0 < L):
        raise DomainError(f"x0={x0} outside (0, {L})")
    if not (0.0 <= t0 < T):
        raise DomainError(f"t0={t0} outside [0, T)")
    nsteps = max(1, int(round((T - t0) / cfg.dt_sim)))
    dt = (T - t0) / nsteps
    # liquidation floor: the decay C picks up when Y runs along the blow-up
    # curve from t0, which is the fastest admissible; anything an order of
    # magnitude above it at T never liquidated
    floor = 10.0 * abs(c) * (0.5 * dt) / (T - t0)

    def worker(j, m):
        expo = np.zeros(m)
        cost = np.zeros(m)

        def hook(k, t_lo, t_hi, x_lo, x_hi, alive, exited):
            h = t_hi - t_lo
            y_lo = np.where(alive, field.interp(x_lo, t_lo), 0.0)
            c_lo = c * np.exp(-expo)
            g_lo = (q - 1.0) * np.abs(c_lo) ** p * y_lo**q
            keep = alive & ~exited
            y_hi = np.where(keep, field.interp(x_hi, min(t_hi, field.grid.t_max)), 0.0)
            d_expo = 0.5 * h * (q - 1.0) * (y_lo ** (q - 1.0) + y_hi ** (q - 1.0))
            expo_hi = expo + d_expo
            c_hi = c * np.exp(-expo_hi)
            g_hi = (q - 1.0) * np.abs(c_hi) ** p * y_hi**q
            cost[keep] += 0.5 * h * (g_lo[keep] + g_hi[keep])
            expo[keep] = expo_hi[keep]
            if np.any(exited):
                # half step to the midpoint exit time, then the closed form
                cost[exited] += 0.5 * h * g_lo[exited]
                d_half = 0.5 * h * (q - 1.0) * y_lo[exited] ** (q - 1.0)
                expo[exited] += d_half
                if params.regime is Regime.OUTSIDE_BALL:
                    c_tau = c * np.exp(-expo[exited])
                    tau = t_lo + 0.5 * h
                    cost[exited] += _y(tau, params) * np.abs(c_tau) ** p

        tau, _, _, alive = simulate_exit_chunk(x0, t0, T, params, cfg, j, m,
                                               step_hook=hook)
        n_inf = 0
        if params.regime is Regime.INSIDE_BALL:
            c_T = np.abs(c) * np.exp(-expo[alive])
            n_inf = int(np.sum(c_T > floor))
        return cost.sum(), (cost**2).sum(), int((~alive).sum()), n_inf

    jobs = _chunk_sizes(cfg.n_paths)
    n_workers = _n_workers()
    if n_workers == 1:
        results = [worker(j, m) for j, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = [f.result() for f in
                       [pool.submit(worker, j, m) for j, m in jobs]]
    total = sumsq = 0.0
    n_inf = 0
    for s, ss, _, ni in results:
        total += s
        sumsq += ss
        n_inf += ni
    n = cfg.n_paths
    mean = total / n
    se = np.sqrt(max(sumsq / n - mean * mean, 0.0) / n)
    const_rate, bang_bang = _alternative_costs(c, t0, params)
    return CostIdentityReport(
        left=float(field.interp(x0, t0) * abs(c) ** p),
        right_mean=float(mean), right_se=float(se), n_paths=n,
        n_infinite=n_inf, constant_rate_cost=const_rate,
        bang_bang_cost=bang_bang)


@dataclass(frozen=True)
class ProbabilityBoundReport:
    mc_prob: float
    std_error: float
    bound: float
    ratio: float


def conditional_probability_bound(x0: float, t: float, field,
                                  params: ProblemParams,
                                  cfg: McConfig) -> ProbabilityBoundReport:
    """Necessary-condition bound P_t[xi = infinity] <= (p-1)^{1-p}
    (T-t)^{p-1} Y_t, with the probability estimated by Monte Carlo
    (exit before T for the outside-ball data, survival for the inside)."""
    from .feynman_kac import mc_exit_probability

    p = params.p
    est = mc_exit_probability(x0, t, params.T, params, cfg)
    prob = est.mean if params.regime is Regime.OUTSIDE_BALL else 1.0 - est.mean
    bound = ((p - 1.0) ** (1.0 - p) * (params.T - t) ** (p - 1.0)
             * field.interp(x0, t))
    return ProbabilityBoundReport(mc_prob=float(prob),
                                  std_error=est.std_error,
                                  bound=float(bound),
                                  ratio=float(prob / bound) if bound > 0 else np.inf)
