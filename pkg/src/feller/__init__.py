"""Lagrangian pseudo-inverse solver for Feller's diffusion equation.

The half-line drift-diffusion equation p_t = [x (gamma p + eta p_x)]_x is
solved in mass coordinates: the cumulative probabilities P_k are frozen and
the node positions move.  The package ships the mass-coordinate scheme, the
closed-form solution families and point symmetries used to validate it, an
implicit Eulerian finite-difference oracle, a Monte Carlo oracle for the
associated square-root diffusion, and a CLI that reproduces the reference
experiments.
"""

from .specfun import (
    EULER_GAMMA,
    NonConvergenceError,
    SeriesControl,
    e1_negative_principal,
    exp_integral_e1,
    exp_integral_ei,
    kummer_m,
)
from .analytic import (
    FellerParams,
    ResidualReport,
    SolutionSample,
    SteadyStateParams,
    SymmetryTransform,
    apply_point_symmetry,
    conservation_flux,
    conservation_law_check,
    pde_residual,
    physical_flux,
    steady_state_p,
    transform_solution,
    xi3_solution,
    xi4_solution,
)
from .lagrange import (
    InitialCondition,
    MassGrid,
    OrderingError,
    ParticleState,
    SamplingConfig,
    build_mass_grid,
    choose_domain_l0,
    double_exp_ic,
    first_moment,
    ic_first_moment,
    initial_positions,
    lagrangian_rhs,
    moment_ode_solution,
    steady_ic,
    tabulated_ic,
    total_probability,
)
from .timestepping import (
    IntegrationError,
    StepControl,
    TrajectoryRecord,
    cfl_reference_dt,
    euler_advance,
    euler_step,
    rk45_advance,
)
from .reconstruct import (
    Snapshot,
    read_snapshot_csv,
    read_tabulated_ic,
    reconstruct_pdf,
    recover_x,
    write_snapshot_csv,
)
from .oracles import (
    DensitySample,
    EulerianConfig,
    EulerianResult,
    Histogram,
    MCConfig,
    TruncationError,
    compare_pdf,
    eulerian_solve,
    mc_simulate,
    write_histogram_csv,
)
from .config import (
    PRESETS,
    ConfigError,
    RunConfig,
    load_run_config,
    make_initial_condition,
    preset_config,
    run_config_from_dict,
)

__version__ = "0.1.0"

__all__ = [
    "EULER_GAMMA",
    "NonConvergenceError",
    "SeriesControl",
    "e1_negative_principal",
    "exp_integral_e1",
    "exp_integral_ei",
    "kummer_m",
    "FellerParams",
    "ResidualReport",
    "SolutionSample",
    "SteadyStateParams",
    "SymmetryTransform",
    "apply_point_symmetry",
    "conservation_flux",
    "conservation_law_check",
    "pde_residual",
    "physical_flux",
    "steady_state_p",
    "transform_solution",
    "xi3_solution",
    "xi4_solution",
    "InitialCondition",
    "MassGrid",
    "OrderingError",
    "ParticleState",
    "SamplingConfig",
    "build_mass_grid",
    "choose_domain_l0",
    "double_exp_ic",
    "first_moment",
    "ic_first_moment",
    "initial_positions",
    "lagrangian_rhs",
    "moment_ode_solution",
    "steady_ic",
    "tabulated_ic",
    "total_probability",
    "IntegrationError",
    "StepControl",
    "TrajectoryRecord",
    "cfl_reference_dt",
    "euler_advance",
    "euler_step",
    "rk45_advance",
    "Snapshot",
    "read_snapshot_csv",
    "read_tabulated_ic",
    "reconstruct_pdf",
    "recover_x",
    "write_snapshot_csv",
    "DensitySample",
    "EulerianConfig",
    "EulerianResult",
    "Histogram",
    "MCConfig",
    "TruncationError",
    "compare_pdf",
    "eulerian_solve",
    "mc_simulate",
    "write_histogram_csv",
    "PRESETS",
    "ConfigError",
    "RunConfig",
    "load_run_config",
    "make_initial_condition",
    "preset_config",
    "run_config_from_dict",
]
