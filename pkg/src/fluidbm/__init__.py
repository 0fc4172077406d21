"""Stationary analysis of Markov-modulated fluid queues and reflected MMBM.

The package solves the stationary distribution of a positive-recurrent
fluid queue, the stationary distribution of reflected Markov-modulated
Brownian motion, and certifies numerically that the former converges to the
latter as the fluid switching rate grows.
"""

from .errors import (
    AdmissibilityError,
    ModelError,
    NotPositiveRecurrentError,
    SolverError,
    SplittingError,
)
from .model import (
    FluidModel,
    MmbmModel,
    fluidize,
    is_fluid_model_file,
    load_fluid_model,
    load_model,
    mean_drift,
    stationary_phase_dist,
)
from .quadsolve import (
    QuadraticEq,
    SpectralMode,
    SpectralSplit,
    cayley_backward,
    cayley_forward,
    cyclic_reduction,
    det_poly_roots,
    eigenvalue_counts,
    riccati_min_nonneg,
    solve_stable,
)
from .fluid import (
    FluidStationary,
    fluid_cdf,
    fluid_cdf_marginal,
    fluid_density,
    fluid_density_grid,
    fluid_mass_zero,
    fluid_stationary,
    k_star,
    psi_star,
    total_probability,
)
from .mmbm import (
    CrossCheck,
    MmbmStationary,
    asmussen_density,
    asmussen_z,
    crosscheck,
    mmbm_cdf,
    mmbm_cdf_marginal,
    mmbm_density,
    mmbm_density_grid,
    mmbm_mass_zero,
    mmbm_quadratic,
    mmbm_stationary,
    zeta1_closed_form,
)
from .morph import (
    ConvergenceReport,
    corner_block,
    corner_block_residual,
    density_convergence,
    expansion_report,
    laplace_exponent_fluid,
    laplace_exponent_mmbm,
    mgf_gap,
    mgf_report,
)
from .mcsim import (
    DEFAULT_SEED,
    EmpiricalCdf,
    ks_distance,
    simulate_fluid,
    simulate_mmbm,
)
from .diagnostics import CheckResult, run_model_checks

__version__ = "0.1.0"
