"""Sample paths of the constructed backward-equation solution pair (Y, Z).

The forward state is a Brownian path W started inside (0, L); the backward
pair follows the solved field u before the exit time tau and the explicit
continuation afterwards:

  outside-ball data (xi = infinity off the exit event): Y = y_t, Z = 0
    after tau, so Y blows up at T exactly on exited paths;
  inside-ball data (xi = infinity on it): Y = 0, Z = 0 after tau.

The backward dynamics use the driver f(y) = -y^q.  Ito's formula on
the field gives, for s < t before the exit time,

  Y_t = Y_s + int_s^t Y_r^q dr + int_s^t Z_r dW_r,    Z = u_x,

and the pathwise defect of the discretized identity is the verification
statistic: it should shrink like sqrt(dt) in RMS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .model import DomainError, ProblemParams, Regime, _y
from .feynman_kac import McConfig


@dataclass(frozen=True)
class SamplePath:
    """One simulated trajectory of (W, Y, Z) on a uniform time grid.

    tau_index is the step index whose midpoint is the exit time, or None
    if the path never left (0, L); clamped marks an exit inside the final
    step, where the outside-ball continuation y_t is evaluated at the step
    midpoint rather than at T."""

    times: np.ndarray
    w: np.ndarray
    y: np.ndarray
    z: np.ndarray
    tau_index: int | None
    tau: float | None
    regime: Regime
    clamped: bool


@dataclass(frozen=True)
class ResidualReport:
    residual: float
    dy: float
    driver_term: float
    martingale_term: float


def path_rng(seed: int, path_index: int) -> Generator:
    return Generator(Philox(key=[seed, path_index]))


def simulate_path(x0: float, t0: float, field, params: ProblemParams,
                  cfg: McConfig, path_index: int = 0) -> SamplePath:
    """Simulate one (W, Y, Z) trajectory from (x0, t0) to T.

    Y and Z are read from the solved field (bilinear value, centered
    difference) while the path stays inside, and switch to the regime's
    explicit continuation at the first exit.  Exits are detected like the
    Monte Carlo engine: endpoint crossing plus an optional Brownian-bridge
    check, with the exit time placed at the step midpoint.
    """
    L, T = params.L, params.T
    if not (0.0 < x0 < L):
        raise DomainError(f"start x0={x0} must lie inside (0, {L})")
    if not (0.0 <= t0 < T):
        raise DomainError(f"start time t0={t0} outside [0, T)")
    nsteps = max(1, int(round((T - t0) / cfg.dt_sim)))
    dt = (T - t0) / nsteps
    rng = path_rng(cfg.seed, path_index)

    times = t0 + dt * np.arange(nsteps + 1)
    w = np.empty(nsteps + 1)
    w[0] = x0
    z_incr = rng.standard_normal(nsteps)
    unif = rng.random(nsteps)

    tau_index = None
    x_hit = None
    for k in range(nsteps):
        x_old = w[k]
        x_new = x_old + np.sqrt(dt) * z_incr[k]
        if tau_index is None:
            crossed = None
            if x_new <= 0.0:
                crossed = 0.0
            elif x_new >= L:
                crossed = L
            elif cfg.bridge_correction:
                p0 = np.exp(-2.0 * x_old * x_new / dt)
                pL = np.exp(-2.0 * (L - x_old) * (L - x_new) / dt)
                if unif[k] < p0:
                    crossed = 0.0
                elif unif[k] < min(p0 + pL, 1.0):
                    crossed = L
            if crossed is not None:
                tau_index = k
                x_hit = crossed
        w[k + 1] = x_new

    tau = None if tau_index is None else float(times[tau_index] + 0.5 * dt)
    clamped = tau_index == nsteps - 1

    y = np.empty(nsteps + 1)
    z = np.empty(nsteps + 1)
    cut = nsteps + 1 if tau_index is None else tau_index + 1
    xs_in = np.clip(w[:cut], 0.0, L)
    ts_in = np.minimum(times[:cut], field.grid.t_max)
    y[:cut] = field.interp(xs_in, ts_in)
    z[:cut] = field.x_derivative(xs_in, ts_in)
    if tau_index is not None:
        post = times[cut:]
        if params.regime is Regime.OUTSIDE_BALL:
            # y_t continuation, with the terminal node held at the last
            # midpoint so the stored path stays finite
            t_eval = np.minimum(post, T - 0.5 * dt)
            y[cut:] = _y(t_eval, params)
        else:
            y[cut:] = 0.0
        z[cut:] = 0.0

    return SamplePath(times=times, w=w, y=y, z=z, tau_index=tau_index,
                      tau=tau, regime=params.regime, clamped=bool(clamped))


def bsde_residual(path: SamplePath, s_index: int, t_index: int,
                  params: ProblemParams) -> ResidualReport:
    """Discrete backward-identity defect over [times[s_index], times[t_index]]:

        Y_s - Y_t + sum_j Y_j^q dt + sum_j Z_j dW_j

    with left-point sums over j in [s_index, t_index)."""
    if not (0 <= s_index < t_index < len(path.times)):
        raise DomainError("need 0 <= s_index < t_index < len(times)")
    dt = path.times[1] - path.times[0]
    sl = slice(s_index, t_index)
    y, z, w = path.y, path.z, path.w
    dy = y[s_index] - y[t_index]
    driver = float(np.sum(y[sl] ** params.q) * dt)
    mart = float(np.sum(z[sl] * np.diff(w)[sl]))
    return ResidualReport(residual=abs(dy + driver + mart),
                          dy=float(dy), driver_term=driver,
                          martingale_term=mart)


def residual_rms(paths, s_index: int, t_index: int, q: float) -> float:
    """RMS over paths of the backward-identity defect on a shared window."""
    total = 0.0
    for path in paths:
        dt = path.times[1] - path.times[0]
        sl = slice(s_index, t_index)
        dy = path.y[s_index] - path.y[t_index]
        driver = np.sum(path.y[sl] ** q) * dt
        mart = np.sum(path.z[sl] * np.diff(path.w)[sl])
        total += float(dy + driver + mart) ** 2
    return np.sqrt(total / len(paths))


@dataclass(frozen=True)
class TerminalStatistics:
    n_paths: int
    n_exited: int
    n_clamped: int
    exit_fraction: float
    max_terminal_y_surviving: float
    max_terminal_y_exited: float
    terminal_tracks_continuation: bool


def terminal_statistics(paths, params: ProblemParams) -> TerminalStatistics:
    """Terminal behavior summary: exited paths must follow the regime's
    continuation exactly; surviving paths report their terminal Y."""
    n = len(paths)
    exited = [p for p in paths if p.tau_index is not None]
    surviving = [p for p in paths if p.tau_index is None]
    tracks = True
    max_exit_y = 0.0
    for p in exited:
        cut = p.tau_index + 1
        if p.regime is Regime.INSIDE_BALL:
            tracks = tracks and bool(np.all(p.y[cut:] == 0.0))
        else:
            dt = p.times[1] - p.times[0]
            ref_t = np.minimum(p.times[cut:], p.times[-1] - 0.5 * dt)
            tracks = tracks and bool(np.array_equal(p.y[cut:], _y(ref_t, params)))
        max_exit_y = max(max_exit_y, float(p.y[-1]))
    max_surv = max((float(abs(p.y[-1])) for p in surviving), default=0.0)
    return TerminalStatistics(
        n_paths=n, n_exited=len(exited),
        n_clamped=sum(1 for p in exited if p.clamped),
        exit_fraction=len(exited) / n,
        max_terminal_y_surviving=max_surv,
        max_terminal_y_exited=max_exit_y,
        terminal_tracks_continuation=tracks)


def minimality_probe(x0: float, t: float, n_list, params: ProblemParams,
                     grid) -> dict:
    """Values of the increasing approximation ladder u_n at (x0, t); the
    gaps between consecutive entries should shrink, exhibiting the limit
    from below that defines the minimal solution."""
    from .pde import solve_un

    if params.regime is not Regime.OUTSIDE_BALL:
        raise DomainError("the u_n ladder belongs to the outside-ball regime")
    out = {}
    for n in sorted(n_list):
        f = solve_un(int(n), grid)
        out[int(n)] = float(f.interp(x0, t))
    return out
