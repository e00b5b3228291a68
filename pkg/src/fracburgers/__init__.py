"""Galerkin solver and verification suite for a nonlocal Burgers equation.

The equation is u_t + (-Delta)^{alpha/2} u + u u_x = forcing on D = (-1, 1)
with zero exterior condition, 0 < alpha < 2, deterministic or driven by a
trace-class Q-Wiener process.  The package assembles the integral fractional
Laplacian exactly on uniform meshes, diagonalizes it, advances the modal
dynamics with exponential (deterministic) or drift-implicit Euler-Maruyama
(stochastic) integrators, and ships executable checks of the energy
identities, a priori bounds, and the weak formulation.
"""

__version__ = "0.1.0"

from .errors import (
    AssemblyError,
    BlowUpError,
    ConfigError,
    DomainError,
    EigenSolverError,
    FracBurgersError,
    MeshMismatchError,
    ParameterError,
)
from .kernel import (
    Field,
    FractionalOrder,
    Mesh,
    NonlocalForm,
    assemble_form,
    getoor_constant,
    mass_matrix,
    rho_weight,
    strong_image,
    symbol_factor,
)
from .galerkin import (
    ConvectionTensor,
    EigenBasis,
    ModalState,
    Trajectory,
    convection_tensor,
    nonlinear_rhs,
    project,
    reconstruct,
    run_deterministic,
    solve_eigenbasis,
    step_deterministic,
)
from .spaces import (
    NormReport,
    SpectralScale,
    dual_norm,
    gagliardo_seminorm_sq,
    norms,
    operator_dual_bound_check,
)
from .stochastic import (
    NoiseModel,
    PathRng,
    SdeEnsemble,
    hs_norm_sq,
    simulate_paths,
    stationary_ou_variance,
    step_sde,
    wiener_increment,
)
from .diagnostics import (
    BesovEstimate,
    CheckVerdict,
    EnergyLedger,
    TestFunction,
    WeakResidualReport,
    besov_estimate,
    check_energy_balance,
    convergence_table,
    gronwall_envelope,
    ledger_from_ensemble,
    ledger_from_trajectory,
    modal_l2t_distance,
    polynomial_bump,
    weak_residual,
)
from .config import (
    RunConfig,
    apply_overrides,
    config_hash,
    initial_field,
    initial_state,
    load_config,
    parse_config,
    serialize_config,
)
