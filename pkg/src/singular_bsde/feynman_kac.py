"""Monte Carlo oracles for the probabilistic representations of the PDE
fields: exit frequencies, the linear baseline, the multiplicative and
additive path-functional representations, and the truncated-horizon barrier.

Paths are exact Gaussian walks with a Brownian-bridge boundary-crossing
correction, simulated in fixed-size chunks whose random streams are keyed
counter-style on (seed, chunk index).  Chunk results are reduced in chunk
order, so estimates are byte-identical no matter how many worker threads
run the chunks (SINGULAR_BSDE_THREADS, default 1).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .model import DomainError, ProblemParams, _y

CHUNK = 1 << 13
_CHUNK_KEY_BASE = 1 << 32  # keeps chunk keys disjoint from per-path keys


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    dt_sim: float
    seed: int
    bridge_correction: bool = True

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be positive")
        if self.dt_sim <= 0.0:
            raise DomainError("dt_sim must be positive")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    n_exited: int
    n_clamped: int  # exits landing in the final step before the horizon


def _n_workers() -> int:
    env = os.environ.get("SINGULAR_BSDE_THREADS")
    if env is None:
        return os.cpu_count() or 1
    return max(1, int(env))


def chunk_rng(seed: int, chunk_index: int) -> Generator:
    return Generator(Philox(key=[seed, _CHUNK_KEY_BASE + chunk_index]))


def simulate_exit_chunk(x0: float, t0: float, horizon: float,
                        params: ProblemParams, cfg: McConfig,
                        chunk_index: int, n: int, step_hook=None):
    """Walk n paths from (x0, t0) to the horizon or the first exit from
    (0, L), whichever comes first.

    Exits are detected from the endpoint position and, when
    cfg.bridge_correction is set, from the Brownian bridge's crossing
    probability over the step; the exit time is recorded at the step
    midpoint and the exit position snapped to the boundary hit.

    step_hook(k, t_lo, t_hi, x_lo, x_hi, alive, exited_now) is called once
    per step with the pre-step alive mask and the mask of paths that exited
    during this step, letting callers accumulate path functionals online.

    Returns (tau, x_exit, x_final, alive) where tau is nan on surviving
    paths, x_exit is the boundary hit (nan if none) and x_final the
    endpoint position of survivors (nan on exited paths).
    """
    L = params.L
    span = horizon - t0
    if span <= 0.0:
        raise DomainError("horizon must exceed the start time")
    nsteps = max(1, int(round(span / cfg.dt_sim)))
    dt = span / nsteps
    rng = chunk_rng(cfg.seed, chunk_index)

    x = np.full(n, float(x0))
    alive = np.ones(n, dtype=bool)
    tau = np.full(n, np.nan)
    x_exit = np.full(n, np.nan)

    for k in range(nsteps):
        z = rng.standard_normal(n)
        u = rng.random(n)
        t_lo = t0 + k * dt
        t_hi = t_lo + dt
        x_old = x.copy()
        x_new = np.where(alive, x + np.sqrt(dt) * z, x)

        hit_lo = alive & (x_new <= 0.0)
        hit_hi = alive & (x_new >= L)
        exited = hit_lo | hit_hi
        if cfg.bridge_correction:
            interior = alive & ~exited
            with np.errstate(over="ignore", invalid="ignore"):
                p0 = np.exp(-2.0 * x_old * x_new / dt)
                pL = np.exp(-2.0 * (L - x_old) * (L - x_new) / dt)
            p0 = np.where(interior, p0, 0.0)
            pL = np.where(interior, pL, 0.0)
            bridge_lo = interior & (u < p0)
            bridge_hi = interior & ~bridge_lo & (u < np.clip(p0 + pL, 0.0, 1.0))
            hit_lo = hit_lo | bridge_lo
            hit_hi = hit_hi | bridge_hi
            exited = hit_lo | hit_hi

        tau[exited] = t_lo + 0.5 * dt
        x_exit[hit_lo] = 0.0
        x_exit[hit_hi] = L
        if step_hook is not None:
            step_hook(k, t_lo, t_hi, x_old, np.clip(x_new, 0.0, L),
                      alive, exited)
        alive = alive & ~exited
        x = np.where(alive, x_new, x)

    x_final = np.where(alive, x, np.nan)
    return tau, x_exit, x_final, alive


def _chunk_sizes(n_paths: int):
    n_chunks = (n_paths + CHUNK - 1) // CHUNK
    return [(j, min(CHUNK, n_paths - j * CHUNK)) for j in range(n_chunks)]


def _reduce(cfg: McConfig, worker):
    """Run worker(chunk_index, n) over all chunks, in parallel if asked,
    and reduce the (sum, sumsq, n_exited, n_clamped) tuples in chunk order."""
    jobs = _chunk_sizes(cfg.n_paths)
    n_workers = _n_workers()
    if n_workers == 1:
        results = [worker(j, m) for j, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(worker, j, m) for j, m in jobs]
            results = [f.result() for f in futures]
    total = sumsq = 0.0
    n_exited = n_clamped = 0
    for s, ss, ne, nc in results:
        total += s
        sumsq += ss
        n_exited += ne
        n_clamped += nc
    n = cfg.n_paths
    mean = total / n
    var = max(sumsq / n - mean * mean, 0.0)
    se = np.sqrt(var / n)
    return McEstimate(mean=float(mean), std_error=float(se), n_paths=n,
                      n_exited=n_exited, n_clamped=n_clamped)


def _check_start(x0, t0, horizon, params):
    if not (0.0 < x0 < params.L):
        raise DomainError(f"start x0={x0} must lie inside (0, {params.L})")
    if not (0.0 <= t0 < horizon):
        raise DomainError(f"start time t0={t0} outside [0, {horizon})")


def mc_exit_probability(x0: float, t0: float, s: float,
                        params: ProblemParams, cfg: McConfig) -> McEstimate:
    """Frequency of paths exiting (0, L) by time s."""
    _check_start(x0, t0, s, params)

    def worker(j, m):
        tau, _, _, alive = simulate_exit_chunk(x0, t0, s, params, cfg, j, m)
        hits = (~alive).astype(float)
        return hits.sum(), hits.sum(), int(hits.sum()), 0

    return _reduce(cfg, worker)


def _mc_discounted_exit(x0, t0, params, cfg, discount_field):
    """E[exp(-int_t^tau g(W,s) ds) y_tau 1_{tau<T}] with g = discount_field
    or g = 0; the zero-field case consumes the identical random stream."""
    T = params.T
    _check_start(x0, t0, T, params)

    def worker(j, m):
        integral = np.zeros(m)
        payoff = np.zeros(m)

        def hook(k, t_lo, t_hi, x_lo, x_hi, alive, exited):
            if discount_field is not None:
                g_lo = discount_field(x_lo, t_lo) ** (params.q - 1.0)
                g_hi = discount_field(x_hi, t_hi) ** (params.q - 1.0)
                dt = t_hi - t_lo
                keep = alive & ~exited
                integral[keep] += 0.5 * dt * (g_lo[keep] + g_hi[keep])
                # half step up to the midpoint exit time
                integral[exited] += 0.5 * dt * g_lo[exited]

        tau, _, _, alive = simulate_exit_chunk(x0, t0, T, params, cfg, j, m,
                                               step_hook=hook)
        hit = ~alive
        payoff[hit] = np.exp(-integral[hit]) * _y(tau[hit], params)
        dt_eff = (T - t0) / max(1, int(round((T - t0) / cfg.dt_sim)))
        n_clamped = int(np.sum(hit & (tau > T - dt_eff)))
        return payoff.sum(), (payoff**2).sum(), int(hit.sum()), n_clamped

    return _reduce(cfg, worker)


def mc_v0(x0: float, t0: float, params: ProblemParams,
          cfg: McConfig) -> McEstimate:
    """Linear baseline E_{x,t}[y_tau 1_{tau<T}]."""
    return _mc_discounted_exit(x0, t0, params, cfg, None)


def mc_u_multiplicative(x0: float, t0: float, field_u, params: ProblemParams,
                        cfg: McConfig) -> McEstimate:
    """E[exp(-int_t^tau u^{q-1}(W_s,s) ds) y_tau 1_{tau<T}], with u read
    from a solved field via bilinear interpolation.  With field_u replaced
    by a zero field this is mc_v0 on the identical draws."""
    return _mc_discounted_exit(x0, t0, params, cfg, field_u.interp)


def mc_u_additive(x0: float, t0: float, field_u, params: ProblemParams,
                  cfg: McConfig) -> McEstimate:
    """E[-int_t^{tau ^ T} u^q(W_s,s) ds + y_tau 1_{tau<T}]."""
    T = params.T
    q = params.q
    _check_start(x0, t0, T, params)

    def worker(j, m):
        integral = np.zeros(m)

        def hook(k, t_lo, t_hi, x_lo, x_hi, alive, exited):
            g_lo = field_u.interp(x_lo, t_lo) ** q
            g_hi = field_u.interp(x_hi, t_hi) ** q
            dt = t_hi - t_lo
            keep = alive & ~exited
            integral[keep] += 0.5 * dt * (g_lo[keep] + g_hi[keep])
            integral[exited] += 0.5 * dt * g_lo[exited]

        tau, _, _, alive = simulate_exit_chunk(x0, t0, T, params, cfg, j, m,
                                               step_hook=hook)
        hit = ~alive
        payoff = -integral
        payoff[hit] += _y(tau[hit], params)
        dt_eff = (T - t0) / max(1, int(round((T - t0) / cfg.dt_sim)))
        n_clamped = int(np.sum(hit & (tau > T - dt_eff)))
        return payoff.sum(), (payoff**2).sum(), int(hit.sum()), n_clamped

    return _reduce(cfg, worker)


def mc_ubar(x0: float, t0: float, n: int, field_ubar,
            params: ProblemParams, cfg: McConfig) -> McEstimate:
    """Truncated-horizon barrier representation:
    E[exp(-int_t^{T-1/n} ubar^{q-1} ds) y_{T-2/n} 1_{tau >= T-1/n}]."""
    if n < 2 or 2.0 / n >= params.T:
        raise DomainError(f"need n >= 2 with 2/n < T, got n={n}")
    horizon = params.T - 1.0 / n
    _check_start(x0, t0, horizon, params)
    y_term = _y(params.T - 2.0 / n, params)

    def worker(j, m):
        integral = np.zeros(m)

        def hook(k, t_lo, t_hi, x_lo, x_hi, alive, exited):
            g_lo = field_ubar.interp(x_lo, t_lo) ** (params.q - 1.0)
            g_hi = field_ubar.interp(x_hi, t_hi) ** (params.q - 1.0)
            keep = alive & ~exited
            integral[keep] += 0.5 * (t_hi - t_lo) * (g_lo[keep] + g_hi[keep])

        tau, _, _, alive = simulate_exit_chunk(x0, t0, horizon, params, cfg,
                                               j, m, step_hook=hook)
        payoff = np.where(alive, np.exp(-integral) * y_term, 0.0)
        return payoff.sum(), (payoff**2).sum(), int((~alive).sum()), 0

    return _reduce(cfg, worker)
