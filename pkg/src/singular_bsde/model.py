"""Problem parameters, the blow-up ODE solution and the smooth boundary family.

The driving nonlinearity is f(y) = y^q with q > 1.  The deterministic
solution exploding at the horizon T is

    y_t = ((q-1)(T-t))^(1-p),   1/p + 1/q = 1,

and the lateral boundary data of the associated PDE problems are built from
y and its time-shifted versions y_{t-1/n}.  The corner-mollified family
psi_mn interpolates between the shifted data on thin strips near x = 0 and
x = L and zero in the middle of the interval.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from scipy.integrate import quad


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class Regime(enum.Enum):
    # Terminal value is +infinity on paths that leave (0, L) before T ...
    OUTSIDE_BALL = "outside"
    # ... or on paths that stay inside (0, L) up to T.
    INSIDE_BALL = "inside"


def holder_conjugate(q: float) -> float:
    """Return p with 1/p + 1/q = 1.  Requires q > 1."""
    if q <= 1.0:
        raise DomainError(f"Holder conjugate needs q > 1, got q={q}")
    return q / (q - 1.0)


@dataclass(frozen=True)
class ProblemParams:
    """One problem instance: exponent q, interval width L, horizon T, regime.

    The conjugate exponent p is always derived from q, never stored.
    OUTSIDE_BALL requires q > 2 (integrability of y near the horizon);
    INSIDE_BALL only needs q > 1.
    """

    q: float
    L: float
    T: float
    regime: Regime

    def __post_init__(self):
        if self.q <= 1.0:
            raise DomainError(f"q must exceed 1, got {self.q}")
        if self.regime is Regime.OUTSIDE_BALL and self.q <= 2.0:
            raise DomainError(
                f"the outside-ball terminal condition requires q > 2, got q={self.q}"
            )
        if self.L <= 0.0 or self.T <= 0.0:
            raise DomainError(f"L and T must be positive, got L={self.L}, T={self.T}")

    @property
    def p(self) -> float:
        return holder_conjugate(self.q)


def _y(t, params: ProblemParams):
    # Blow-up curve without the t >= 0 check; used for shifted arguments.
    # Accepts arrays and broadcasts.
    if np.any(np.asarray(t) >= params.T):
        raise DomainError(f"y_t is only defined for t < T, got t={t}, T={params.T}")
    return ((params.q - 1.0) * (params.T - np.asarray(t))) ** (1.0 - params.p)


def blowup_solution(t: float, params: ProblemParams) -> float:
    """y_t = ((q-1)(T-t))^(1-p), the ODE solution with y_T = +infinity."""
    if t < 0.0:
        raise DomainError(f"t must lie in [0, T), got t={t}")
    return _y(t, params)


def shifted_solution(t: float, n: int, params: ProblemParams) -> float:
    """y_{t-1/n}; bounded by (q-1)^(1-p) n^(p-1) on [0, T]."""
    if n < 1:
        raise DomainError(f"shift index n must be >= 1, got {n}")
    return _y(t - 1.0 / n, params)


def shifted_bound(n: int, params: ProblemParams) -> float:
    """Uniform bound (q-1)^(1-p) n^(p-1) of the shifted solution on [0, T]."""
    return (params.q - 1.0) ** (1.0 - params.p) * float(n) ** (params.p - 1.0)


@dataclass(frozen=True)
class BoundaryIndices:
    """Indices of the mollified boundary family: m smooths the corner, n
    shifts the blow-up time by 1/n."""

    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DomainError(f"indices must be >= 1, got m={self.m}, n={self.n}")


def _bump(y: float) -> float:
    # exp(-1/(1-(2y-1)^2)) extended by 0 outside (0, 1)
    w = 1.0 - (2.0 * y - 1.0) ** 2
    if w <= 0.0:
        return 0.0
    return math.exp(-1.0 / w)


@lru_cache(maxsize=1)
def _bump_norm() -> float:
    val, _ = quad(_bump, 0.0, 1.0, epsabs=1e-14, epsrel=1e-13)
    return val


def mollifier(x: float) -> float:
    """Smooth cutoff eta: 1 on (-inf, 0], 0 on [1, inf), strictly decreasing
    in between; the normalized integral of the standard bump function."""
    if x <= 0.0:
        return 1.0
    if x >= 1.0:
        return 0.0
    val, _ = quad(_bump, x, 1.0, epsabs=1e-13, epsrel=1e-13)
    return val / _bump_norm()


def psi_mn(x: float, t: float, idx: BoundaryIndices, params: ProblemParams) -> float:
    """Two-sided corner-mollified boundary data.

    psi_mn(x,t) = y_{t-1/n} [ (1 - x m/2) eta((m^2 x - 1)/(m-1))
                            + (1 - (L-x) m/2) eta((m^2 (L-x) - 1)/(m-1)) ]

    Valid for m > max(2/L, 1); equals y_{t-1/n} on the lateral boundary and
    vanishes once both mollifier arguments exceed 1.
    """
    m, n = idx.m, idx.n
    L = params.L
    if m <= max(2.0 / L, 1.0):
        raise DomainError(f"psi_mn needs m > max(2/L, 1) = {max(2.0 / L, 1.0)}, got m={m}")
    if not (0.0 <= x <= L) or not (0.0 <= t <= params.T):
        raise DomainError(f"(x,t)=({x},{t}) outside [0,L]x[0,T]")
    yn = shifted_solution(t, n, params)
    left = (1.0 - x * m / 2.0) * mollifier((m * m * x - 1.0) / (m - 1.0))
    right = (1.0 - (L - x) * m / 2.0) * mollifier((m * m * (L - x) - 1.0) / (m - 1.0))
    return yn * (left + right)
