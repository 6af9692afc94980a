"""Numerics for backward stochastic differential equations whose terminal
value is infinite on a Brownian exit event.

The package builds the solution in layers: closed-form exit-time densities
(`densities`), finite-difference reaction-diffusion fields with singular
boundary data (`pde`), Monte Carlo oracles for the probabilistic
representations (`feynman_kac`), pathwise (Y, Z) simulation (`bsde`), the
stochastic-control identities (`control`), and a CLI (`cli`).
"""

from .model import (
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
from .densities import (
    QuadratureSpec,
    SeriesTruncation,
    constrained_density,
    exit_cdf,
    exit_density,
    truncation_for,
    v0,
)
from .pde import (
    Field,
    Grid,
    SolveReport,
    SolverError,
    pde_residual,
    solve_linear_v0,
    solve_u,
    solve_ubar_n,
    solve_umn,
    solve_un,
    solve_vbar,
    solve_vbar_n,
)
from .feynman_kac import (
    McConfig,
    McEstimate,
    mc_exit_probability,
    mc_u_additive,
    mc_u_multiplicative,
    mc_ubar,
    mc_v0,
)
from .bsde import (
    ResidualReport,
    SamplePath,
    TerminalStatistics,
    bsde_residual,
    minimality_probe,
    residual_rms,
    simulate_path,
    terminal_statistics,
)
from .control import (
    ControlState,
    CostIdentityReport,
    ProbabilityBoundReport,
    conditional_probability_bound,
    cost_identity_check,
    optimal_control_path,
    value_function,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
