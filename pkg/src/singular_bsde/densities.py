"""Closed-form exit-time and constrained transition densities on (0, L).

All formulas are lattice (image-charge) sums over n in Z, truncated
symmetrically at |n| <= n_max with a rigorous Gaussian tail bound, so each
evaluation carries a certificate of the dropped mass.

Functions accept scalar or array-valued time/space arguments and broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import tanhsinh
from scipy.special import ndtr, roots_legendre

from .model import DomainError, ProblemParams, Regime, _y

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SeriesTruncation:
    """Symmetric truncation |n| <= n_max with a bound on the dropped terms."""

    n_max: int
    tail_bound: float


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature used for the singular time integral defining v0.

    singularity_exponent is the integrable endpoint power (T-s)^(1-p);
    it must lie in (-1, 0), which is exactly q > 2.
    """

    scheme: str = "tanh-sinh"  # or "gauss-legendre-composite"
    abs_tol: float = 1e-9
    singularity_exponent: float | None = None

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise DomainError("abs_tol must be positive")
        if self.scheme not in ("tanh-sinh", "gauss-legendre-composite"):
            raise DomainError(f"unknown quadrature scheme {self.scheme!r}")
        if self.singularity_exponent is not None and not (
            -1.0 < self.singularity_exponent < 0.0
        ):
            raise DomainError("singularity_exponent must lie in (-1, 0)")


def _tail_bound(n: int, L: float, delta: float) -> float:
    # Gaussian bound on the terms dropped beyond lattice distance n*L
    arg = (n * L) ** 2 / (2.0 * delta)
    if arg > 700.0:
        return 0.0
    return 2.0 * np.exp(-arg) * (n * L + L) / delta**1.5


def truncation_for(delta: float, L: float, tol: float = 1e-12) -> SeriesTruncation:
    """Smallest n_max >= 8 whose Gaussian tail bound falls below tol."""
    if delta <= 0.0:
        raise DomainError(f"time increment must be positive, got {delta}")
    n = 8
    while _tail_bound(n, L, delta) >= tol and n < 100000:
        n += max(1, n // 4)
    return SeriesTruncation(n_max=n, tail_bound=_tail_bound(n, L, delta))


def _lattice(n_max: int) -> np.ndarray:
    return np.arange(-n_max, n_max + 1, dtype=float)


def exit_cdf(x, t, s, params: ProblemParams, tol: float = 1e-12,
             return_certificate: bool = False):
    """P_{x,t}(tau <= s): probability the path started at x at time t has
    left (0, L) by time s.  Identically 1 for x on the boundary."""
    L = params.L
    s = np.asarray(s, dtype=float)
    if np.any(s <= t):
        raise DomainError("exit_cdf needs s > t")
    if not (0.0 <= x <= L):
        raise DomainError(f"x={x} outside [0, {L}]")
    delta = s - t
    if x == 0.0 or x == L:
        out = np.ones_like(delta)
        certificate = SeriesTruncation(0, 0.0)
    else:
        trunc = truncation_for(float(np.max(delta)), L, tol)
        n = _lattice(trunc.n_max)[:, None]
        d = np.ravel(delta)[None, :]
        rt = np.sqrt(d)
        # second difference of the normal CDF over consecutive lattice points
        terms = (
            ndtr(((2.0 * n + 2.0) * L - x) / rt)
            + ndtr((2.0 * n * L - x) / rt)
            - 2.0 * ndtr(((2.0 * n + 1.0) * L - x) / rt)
        )
        out = 1.0 + terms.sum(axis=0)
        out = np.clip(out.reshape(np.shape(delta)), 0.0, 1.0)
        certificate = trunc
    out = out if out.ndim else float(out)
    if return_certificate:
        return out, certificate
    return out


def exit_density(x, t, s, params: ProblemParams, tol: float = 1e-12,
                 return_certificate: bool = False):
    """f_tau(x,t,s), density in s of the first exit time from (0, L)."""
    L = params.L
    s = np.asarray(s, dtype=float)
    if np.any(s <= t):
        raise DomainError("exit_density needs s > t")
    if not (0.0 < x < L):
        raise DomainError(f"exit density degenerates on the boundary, x={x}")
    delta = np.ravel(s - t)
    trunc = truncation_for(float(np.max(delta)), L, tol)
    n = _lattice(trunc.n_max)[:, None]
    d = delta[None, :]
    a1 = (2.0 * n + 1.0) * L - x
    a2 = 2.0 * n * L - x
    terms = a1 * np.exp(-(a1 * a1) / (2.0 * d)) - a2 * np.exp(-(a2 * a2) / (2.0 * d))
    out = terms.sum(axis=0) * delta**-1.5 / _SQRT2PI
    out = out.reshape(np.shape(s - t))
    out = out if out.ndim else float(out)
    if return_certificate:
        return out, trunc
    return out


def constrained_density(x, t, s, a, params: ProblemParams, tol: float = 1e-12,
                        return_certificate: bool = False):
    """f_W(x,t,s,a): sub-probability density of W_s at a on the event that
    the path has stayed inside (0, L) throughout [t, s]."""
    L = params.L
    if np.any(np.asarray(s) <= t):
        raise DomainError("constrained_density needs s > t")
    if not (0.0 < x < L):
        raise DomainError(f"x={x} outside (0, {L})")
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0) or np.any(a > L):
        raise DomainError("evaluation point a outside [0, L]")
    delta = float(s - t) if np.isscalar(s) or np.asarray(s).ndim == 0 else None
    if delta is None:
        raise DomainError("constrained_density takes scalar s; vectorize over a")
    trunc = truncation_for(delta, L, tol)
    n = _lattice(trunc.n_max)[:, None]
    aa = np.ravel(a)[None, :]
    up = aa + 2.0 * n * L - x
    dn = 2.0 * n * L - aa - x
    terms = np.exp(-(up * up) / (2.0 * delta)) - np.exp(-(dn * dn) / (2.0 * delta))
    out = terms.sum(axis=0) / np.sqrt(2.0 * np.pi * delta)
    out = out.reshape(np.shape(a))
    out = out if out.ndim else float(out)
    if return_certificate:
        return out, trunc
    return out


def _composite_gl(f, lo, hi, n_panels=128, order=16, grading=5.0):
    """Composite Gauss-Legendre with mesh graded toward the upper endpoint."""
    nodes, weights = roots_legendre(order)
    u = np.linspace(0.0, 1.0, n_panels + 1)
    edges = hi - (hi - lo) * (1.0 - u) ** grading  # clustered at hi
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xm = 0.5 * (a + b) + 0.5 * (b - a) * nodes
        total += 0.5 * (b - a) * np.sum(weights * f(xm))
    return total


def v0(x: float, t: float, params: ProblemParams,
       quad: QuadratureSpec | None = None, tol: float = 1e-12) -> float:
    """v0(x,t) = E_{x,t}[ y_tau 1_{tau < T} ] = int_t^T f_tau(x,t,s) y_s ds.

    The linear-heat baseline; requires the outside-ball regime (q > 2) so
    that the endpoint power (T-s)^(1-p) is integrable.
    """
    if params.regime is not Regime.OUTSIDE_BALL:
        raise DomainError("v0 is only defined in the outside-ball regime (q > 2)")
    quad = quad or QuadratureSpec(singularity_exponent=1.0 - params.p)
    L, T = params.L, params.T
    if not (0.0 <= x <= L) or not (0.0 <= t <= T):
        raise DomainError(f"(x,t)=({x},{t}) outside the closed domain")
    if (x == 0.0 or x == L) and t == T:
        raise DomainError("v0 is discontinuous at the corners (0,T), (L,T)")
    if x == 0.0 or x == L:
        return _y(t, params)
    if t == T:
        return 0.0

    t_lo = np.nextafter(t, T)

    def integrand(s):
        s = np.clip(s, t_lo, np.nextafter(T, t))
        ys = ((params.q - 1.0) * (T - s)) ** (1.0 - params.p)
        return exit_density(x, t, s, params, tol=tol) * ys

    if quad.scheme == "tanh-sinh":
        res = tanhsinh(integrand, t, T, atol=quad.abs_tol)
        return float(res.integral)
    return float(_composite_gl(integrand, t, T))
