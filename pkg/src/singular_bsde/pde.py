"""Finite-difference solver for the reaction-diffusion terminal value problem

    dV/dt + (1/2) d2V/dx2 - V^q = 0   on (0, L) x [0, t_max),

marched backward from the terminal slice.  Lateral data may be singular
(blowing up at the final time), so the first steps next to the terminal
slice are taken fully implicitly; afterwards the scheme is Crank-Nicolson
in the diffusion with a fully implicit reaction, solved by damped Newton
on a tridiagonal Jacobian.

The scheme matrix is an M-matrix whenever dt <= 2 dx^2, which makes the
discrete solution map monotone in both the terminal and lateral data; the
solver records whether that held so comparison experiments can trust their
orderings.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .model import DomainError, ProblemParams, Regime, _y, psi_mn, BoundaryIndices

_NEWTON_TOL = 1e-10
_NEWTON_MAX = 50
_N_IMPLICIT = 2  # fully implicit steps taken off the terminal slice


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid on [0, L] x [0, t_max].

    Interior nodes x_1..x_nx with spacing dx = L/(nx+1); time levels
    t_0=0..t_nt=t_max with dt = t_max/nt.  t_max defaults to the horizon T.
    """

    params: ProblemParams
    nx: int
    nt: int
    t_max: float | None = None

    def __post_init__(self):
        if self.nx < 3 or self.nt < 3:
            raise DomainError("need at least 3 interior nodes and 3 time steps")
        tm = self.params.T if self.t_max is None else self.t_max
        if not (0.0 < tm <= self.params.T):
            raise DomainError(f"t_max={tm} outside (0, T]")
        object.__setattr__(self, "t_max", float(tm))

    @property
    def dx(self) -> float:
        return self.params.L / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(0.0, self.params.L, self.nx + 2)

    @property
    def ts(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.nt + 1)

    @property
    def monotone(self) -> bool:
        return self.dt <= 2.0 * self.dx**2 + 1e-15


@dataclass(frozen=True)
class SolveReport:
    converged: bool
    newton_iters_max: int
    monotone_scheme: bool
    residual_sup: float


@dataclass
class Field:
    """Solved field on a Grid: values[i, k] at (x_i, t_k), including boundary
    columns i=0 and i=nx+1.  thetas[k] is the diffusion weighting actually
    used for the step from level k+1 down to k; reaction records whether the
    nonlinear term was active (False for the linear heat baseline)."""

    grid: Grid
    values: np.ndarray
    tag: str
    thetas: np.ndarray
    reaction: bool = True
    report: SolveReport | None = None

    def interp(self, x, t):
        """Bilinear interpolation; accepts scalars or arrays."""
        g = self.grid
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        xi = np.clip(x / g.dx, 0.0, g.nx + 1 - 1e-12)
        tk = np.clip(t / g.dt, 0.0, g.nt - 1e-12)
        i0 = np.floor(xi).astype(int)
        k0 = np.floor(tk).astype(int)
        fx = xi - i0
        ft = tk - k0
        v = self.values
        out = ((1 - fx) * (1 - ft) * v[i0, k0]
               + fx * (1 - ft) * v[i0 + 1, k0]
               + (1 - fx) * ft * v[i0, k0 + 1]
               + fx * ft * v[i0 + 1, k0 + 1])
        return float(out) if out.ndim == 0 else out

    def x_derivative(self, x, t):
        """Centered difference of the interpolated field in x."""
        g = self.grid
        h = g.dx
        xl = np.clip(np.asarray(x, dtype=float) - h, 0.0, g.params.L)
        xr = np.clip(np.asarray(x, dtype=float) + h, 0.0, g.params.L)
        return (self.interp(xr, t) - self.interp(xl, t)) / (xr - xl)

    def to_csv(self, path):
        g = self.grid
        buf = io.StringIO()
        buf.write(f"# {g.params.L!r},{g.params.T!r},{g.params.q!r},"
                  f"{g.nx},{g.nt},{self.tag}\n")
        buf.write("i,k,x,t,value\n")
        xs, ts = g.xs, g.ts
        for i in range(g.nx + 2):
            for k in range(g.nt + 1):
                buf.write(f"{i},{k},{float(xs[i])!r},{float(ts[k])!r},"
                          f"{float(self.values[i, k])!r}\n")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline()
            if not header.startswith("# "):
                raise DomainError(f"{path}: missing field header")
            L, T, q, nx, nt, tag = header[2:].strip().split(",")
            fh.readline()  # column names
            rows = np.loadtxt(fh, delimiter=",")
        nx, nt = int(nx), int(nt)
        regime = Regime.INSIDE_BALL if "inside" in tag else Regime.OUTSIDE_BALL
        params = ProblemParams(q=float(q), L=float(L), T=float(T), regime=regime)
        t_max = rows[:, 3].max()
        grid = Grid(params, nx, nt, t_max=t_max)
        values = np.empty((nx + 2, nt + 1))
        values[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 4]
        return cls(grid=grid, values=values, tag=tag,
                   thetas=np.full(nt, np.nan), reaction=True)


def _time_mesh(grid: Grid, grade_last: int):
    """Time levels for the march: the grid levels, with the final step
    geometrically refined toward t_max and the two steps before it split
    into quarters when grading is requested.  Returns the mesh together
    with the index each grid level occupies in it."""
    ts = grid.ts
    if grade_last <= 0:
        return ts, np.arange(grid.nt + 1)
    levels = list(ts)
    a, b = ts[-2], ts[-1]
    levels += [b - (b - a) * 0.5**j for j in range(1, grade_last + 1)]
    for k in range(max(0, grid.nt - 3), grid.nt - 1):
        a, b = ts[k], ts[k + 1]
        levels += [a + (b - a) * j / 4.0 for j in (1, 2, 3)]
    mesh = np.array(sorted(set(levels)))
    idx = np.searchsorted(mesh, ts)
    return mesh, idx


def _march(grid: Grid, lateral, terminal: np.ndarray, reaction: bool = True,
           theta: float = 0.5, n_implicit: int = _N_IMPLICIT,
           grade_last: int = 0, newton_tol: float = _NEWTON_TOL,
           newton_max: int = _NEWTON_MAX):
    """Backward time march.  lateral(t) returns the pair of boundary values
    at time t (finite for every t strictly below t_max); terminal is the
    interior + boundary slice at t_max, with any infinite corner entries
    never touched because the steps next to the terminal slice ignore the
    old level's boundary data entirely.  grade_last > 0 refines the final
    steps in time for lateral data that blows up at t_max."""
    p = grid.params
    q = p.q
    nx, nt = grid.nx, grid.nt
    dx = grid.dx
    mesh, grid_idx = _time_mesh(grid, grade_last)
    nsteps = len(mesh) - 1
    # theta=1 at or past this level; with grading the tiny substeps do the
    # damping themselves, so only the step touching t_max must be implicit
    implicit_from = mesh[-2] if grade_last > 0 else grid.ts[max(0, nt - n_implicit)]

    values = np.empty((nx + 2, nt + 1))
    values[:, nt] = terminal
    thetas = np.full(nt, np.nan)
    iters_max = 0
    u_full = terminal.astype(float).copy()

    for k in range(nsteps - 1, -1, -1):
        t_new, t_old = mesh[k], mesh[k + 1]
        dt = t_old - t_new
        lam = dt / (2.0 * dx * dx)
        th = 1.0 if t_new >= implicit_from - 1e-14 else theta
        u_old = u_full[1:-1]
        bl, br = lateral(t_new)

        # explicit part of the diffusion, evaluated on the old level
        rhs = u_old.copy()
        if th < 1.0:
            w = (1.0 - th) * lam
            lap = np.empty(nx)
            lap[0] = u_full[0] - 2.0 * u_old[0] + u_old[1]
            lap[-1] = u_old[-2] - 2.0 * u_old[-1] + u_full[-1]
            if nx > 2:
                lap[1:-1] = u_old[:-2] - 2.0 * u_old[1:-1] + u_old[2:]
            rhs += w * lap
        w_imp = th * lam

        # Newton solve: u - w_imp*Lap(u) + dt*u^q = rhs (+ boundary terms)
        b = rhs.copy()
        b[0] += w_imp * bl
        b[-1] += w_imp * br
        u = np.clip(u_old, 0.0, None)
        u = np.where(np.isfinite(u), u, np.abs(bl) + np.abs(br) + 1.0)
        converged = False
        for it in range(newton_max):
            lap_u = np.empty(nx)
            lap_u[0] = -2.0 * u[0] + u[1]
            lap_u[-1] = u[-2] - 2.0 * u[-1]
            if nx > 2:
                lap_u[1:-1] = u[:-2] - 2.0 * u[1:-1] + u[2:]
            if reaction:
                F = u - w_imp * lap_u + dt * u**q - b
                diag = 1.0 + 2.0 * w_imp + dt * q * u ** (q - 1.0)
            else:
                F = u - w_imp * lap_u - b
                diag = np.full(nx, 1.0 + 2.0 * w_imp)
            res = np.max(np.abs(F))
            if res < newton_tol:
                converged = True
                iters_max = max(iters_max, it)
                break
            ab = np.zeros((3, nx))
            ab[0, 1:] = -w_imp
            ab[1, :] = diag
            ab[2, :-1] = -w_imp
            step = solve_banded((1, 1), ab, F)
            damp = 1.0
            u_new = u - step
            while np.any(u_new < 0.0) and damp > 1e-8:
                damp *= 0.5
                u_new = u - damp * step
            u = np.clip(u_new, 0.0, None)
        if not converged:
            raise SolverError(
                f"Newton stalled at t={t_new:.6g}, residual {res:.3e}")
        u_full = np.concatenate([[bl], u, [br]])
        pos = np.searchsorted(grid_idx, k)
        if pos <= nt and grid_idx[pos] == k:
            values[:, pos] = u_full
            # theta is only meaningful when the step was a plain grid step
            if pos < nt and grid_idx[pos + 1] == k + 1:
                thetas[pos] = th

    report = SolveReport(converged=True, newton_iters_max=iters_max,
                         monotone_scheme=grid.monotone, residual_sup=0.0)
    return values, thetas, report


def _terminal_with_corners(grid: Grid, interior_fn, lateral):
    """Terminal slice; corner entries take the lateral value when finite
    and 0 otherwise (a corner discontinuity the implicit start absorbs)."""
    xs = grid.xs
    term = np.empty(grid.nx + 2)
    term[1:-1] = interior_fn(xs[1:-1])
    bl, br = lateral(grid.t_max)
    term[0] = bl if np.isfinite(bl) else 0.0
    term[-1] = br if np.isfinite(br) else 0.0
    return term


def solve_linear_v0(grid: Grid) -> Field:
    """Linear heat baseline with lateral data y_t and zero terminal data.

    Discretizes the problem whose probabilistic value is
    E_{x,t}[y_tau 1_{tau<T}]; outside-ball regime only.
    """
    p = grid.params
    if p.regime is not Regime.OUTSIDE_BALL:
        raise DomainError("the linear baseline needs the outside-ball regime")
    if grid.t_max != p.T:
        raise DomainError("the linear baseline is posed on the full horizon")

    def lateral(t):
        v = _y(t, p) if t < p.T else np.inf
        return v, v

    terminal = _terminal_with_corners(grid, lambda x: np.zeros_like(x), lateral)
    values, thetas, report = _march(grid, lateral, terminal, reaction=False,
                                    grade_last=24)
    return Field(grid=grid, values=values, tag="v0-outside",
                 thetas=thetas, reaction=False, report=report)


def solve_umn(m: int, n: int, grid: Grid, grade_last: int = 0) -> Field:
    """Doubly regularized problem: smooth terminal data psi_{m,n}(x, T) and
    lateral data y^{(n)}; decreasing in m, increasing in n."""
    p = grid.params
    idx = BoundaryIndices(m=m, n=n)
    if grid.t_max != p.T:
        raise DomainError("the regularized problem is posed on the full horizon")

    def lateral(t):
        v = _y(t - 1.0 / n, p)
        return v, v

    xs = grid.xs
    term = np.empty(grid.nx + 2)
    term[:] = [psi_mn(float(x), p.T, idx, p) for x in xs]
    values, thetas, report = _march(grid, lateral, term, grade_last=grade_last)
    return Field(grid=grid, values=values, tag=f"umn-m{m}-n{n}-{p.regime.value}",
                 thetas=thetas, report=report)


def solve_un(n: int, grid: Grid, grade_last: int = 0) -> Field:
    """m -> infinity limit: lateral data y^{(n)}, zero terminal data;
    increasing in n."""
    p = grid.params
    if n < 1:
        raise DomainError("n must be a positive integer")
    if grid.t_max != p.T:
        raise DomainError("posed on the full horizon")

    def lateral(t):
        v = _y(t - 1.0 / n, p)
        return v, v

    terminal = _terminal_with_corners(grid, lambda x: np.zeros_like(x), lateral)
    values, thetas, report = _march(grid, lateral, terminal,
                                    grade_last=grade_last)
    return Field(grid=grid, values=values, tag=f"un-n{n}-{p.regime.value}",
                 thetas=thetas, report=report)


def solve_u(grid: Grid, m_schedule=None, n_schedule=None,
            tol: float = 1e-6) -> Field:
    """Double limit u = lim_n lim_m u_{m,n}: run the m sweep to sup-norm
    stabilization inside each n, then the n sweep.  In practice the m limit
    is solve_un (the terminal layer collapses below the grid resolution
    quickly), so the m sweep only confirms stabilization."""
    p = grid.params
    m_lo = int(np.ceil(max(2.0 / p.L, 1.0))) + 1
    if m_schedule is None:
        m_schedule = [m_lo * 2**j for j in range(15)]
    if n_schedule is None:
        n_schedule = [4 * 2**j for j in range(13)]

    prev_n = None
    field = None
    for n in n_schedule:
        prev_m = None
        for m in m_schedule:
            field = solve_umn(m, n, grid)
            cur = field.values[:, :-1]
            if prev_m is not None and np.max(np.abs(cur - prev_m)) < tol:
                break
            prev_m = cur.copy()
        cur = field.values[:, :-1]
        if prev_n is not None and np.max(np.abs(cur - prev_n)) < tol:
            break
        prev_n = cur.copy()
    field.tag = f"u-limit-{p.regime.value}"
    return field


def solve_ubar_n(n: int, grid: Grid) -> Field:
    """Truncated-horizon barrier: zero lateral data on [0, T - 1/n] and
    constant terminal data y_{T-2/n}.  The returned grid keeps the parent
    step sizes but ends at T - 1/n."""
    p = grid.params
    if n < 2 or 2.0 / n >= p.T:
        raise DomainError(f"need n >= 2 with 2/n < T, got n={n}")
    t_end = p.T - 1.0 / n
    nt_n = max(3, int(round(t_end / grid.dt)))
    sub = Grid(p, grid.nx, nt_n, t_max=t_end)
    yterm = _y(p.T - 2.0 / n, p)

    def lateral(t):
        return 0.0, 0.0

    term = np.full(grid.nx + 2, yterm)
    term[0] = term[-1] = 0.0
    values, thetas, report = _march(sub, lateral, term)
    return Field(grid=sub, values=values, tag=f"ubar-n{n}-{p.regime.value}",
                 thetas=thetas, report=report)


def solve_vbar_n(n: int, grid: Grid) -> Field:
    """Full-horizon barrier with zero lateral data and constant terminal
    data y_{T - 1/n}; increasing in n and dominated by every solve_ubar_n
    slab it shares a region with."""
    p = grid.params
    if n < 1 or 1.0 / n >= p.T:
        raise DomainError(f"need 1/n < T, got n={n}")
    if grid.t_max != p.T:
        raise DomainError("posed on the full horizon")
    yterm = _y(p.T - 1.0 / n, p)

    def lateral(t):
        return 0.0, 0.0

    term = np.full(grid.nx + 2, yterm)
    term[0] = term[-1] = 0.0
    values, thetas, report = _march(grid, lateral, term)
    return Field(grid=grid, values=values, tag=f"vbar-n{n}-{p.regime.value}",
                 thetas=thetas, report=report)


def solve_vbar(grid: Grid, n_schedule=None, tol: float = 1e-6,
               eps: float | None = None) -> Field:
    """n -> infinity limit of solve_vbar_n, with stabilization measured in
    sup norm over t <= T - eps (the terminal slice itself diverges)."""
    p = grid.params
    if eps is None:
        eps = 0.1 * p.T
    if n_schedule is None:
        n_schedule = [4 * 2**j for j in range(13)]
    k_cut = int(np.floor((p.T - eps) / grid.dt)) + 1
    prev = None
    field = None
    for n in n_schedule:
        if 1.0 / n >= p.T:
            continue
        field = solve_vbar_n(n, grid)
        cur = field.values[:, :k_cut]
        if prev is not None and np.max(np.abs(cur - prev)) < tol:
            break
        prev = cur.copy()
    field.tag = f"vbar-limit-{p.regime.value}"
    return field


def pde_residual(field: Field) -> float:
    """Sup over interior nodes of the discrete operator applied to the
    stored values, using the per-step theta actually taken; small for any
    slice the solver converged on."""
    g = field.grid
    v = field.values
    dx, dt = g.dx, g.dt
    worst = 0.0
    for k in range(g.nt):
        th = field.thetas[k]
        if not np.isfinite(th):
            continue  # step was internally refined; one-step identity n/a
        u0 = v[1:-1, k]
        u1 = v[1:-1, k + 1]
        lap0 = (v[:-2, k] - 2.0 * u0 + v[2:, k]) / dx**2
        lap1 = (v[:-2, k + 1] - 2.0 * u1 + v[2:, k + 1]) / dx**2
        if th < 1.0 and not np.all(np.isfinite(lap1)):
            continue
        react0 = u0 ** g.params.q if field.reaction else 0.0
        F = (u1 - u0) / dt + 0.5 * (th * lap0 + (1 - th) * lap1) - react0
        worst = max(worst, float(np.max(np.abs(F))))
    return worst
