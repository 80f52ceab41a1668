"""Energy and entropy stable nonlinear boundary conditions on SBP grids."""
from .boundary import (
    BoundaryCondition,
    CharSplit,
    InadmissibleBoundaryCondition,
    SingularSTilde,
    background_condition,
    background_data,
    boundary_energy_flux,
    boundary_operator_data,
    check_R_condition,
    check_S_smallness,
    penalty_vector,
    rotate_boundary_state,
)
from .config import ConfigError, RunConfig, parse_config
from .core import (
    ConstraintViolation,
    DegenerateRotation,
    DimensionError,
    NormalizationError,
    SkewBCError,
    SkewSystem,
    StateField,
    entropy_flux,
    total_energy,
    verify_skew_conditions,
)
from .equations import CeeModel, IeeModel, SweModel, psi, psi_switch_mach2
from .sbp import SbpGrid, assemble_grid, build_lifting_map, build_sbp_1d
from .solver import (
    AdmissibilityLoss,
    EnergyLedger,
    SemiDiscreteSystem,
    assemble_rhs,
    energy_rate_identity,
    entropy_audit,
    rk4_advance,
)

__version__ = "0.1.0"
