"""Multi-species swarming simulations across three model levels.

The package evolves interacting particle ensembles with inertia
(velocities relaxing to a nonlocal interaction field at rate 1/epsilon),
constructs kinetic measure solutions by transporting initial data along
the characteristic flow, and solves the first-order macroscopic limit
both as a particle system and on a 1-D finite-volume grid.  Transport
distances, alignment functionals and modulated energies quantify how the
inertial system approaches the limit as epsilon shrinks.
"""

from ._accel import NUMBA_AVAILABLE, USING_NUMBA
from ._version import __version__
from .diagnostics import (
    DiagnosticsSeries,
    ModulatedEnergy,
    free_energy,
    interaction_energy,
    lp_norm,
    modulated_energy,
    second_moment_energy,
    velocity_alignment,
)
from .ensemble import (
    IntegratorConfig,
    MultiSpeciesState,
    SpeciesEnsemble,
    state_fields,
    step_first_order,
    step_second_order,
    support_radius,
)
from .errors import (
    CFLViolationError,
    ConfigError,
    DegenerateInitialDistanceError,
    DimensionMismatchError,
    FieldEvaluationError,
    GridMismatchError,
    GridTooSmallError,
    InsufficientValuesError,
    MissingVelocitiesError,
    NoConvergenceError,
    NormalizationError,
    NotRegularizableWarning,
    OutputError,
    QuadratureDivergenceError,
    SchemeMismatchError,
    SingularEntryError,
    SingularEvaluationError,
    SizeCapError,
    SpeciesCountMismatchError,
    SwarmlimError,
)
from .grids import DensityGrid1D
from .kernels import (
    KernelBounds,
    KernelMatrix,
    KernelSpec,
    assemble_field,
    eval_grad,
    eval_potential,
    kernel_bounds,
    regularize,
    regularize_matrix,
)
from .kinetic import (
    FieldFn,
    PhasePoint,
    PicardConfig,
    PicardResult,
    StabilityResult,
    field_from_state,
    flow_map,
    picard_solve,
    pushforward,
    stability_ratio,
)
from .macro import (
    GridTrajectory,
    VelocityFieldSample,
    grid_solve_1d,
    macro_particle_solve,
    material_derivative,
    transport_velocity_centers,
    velocity_field,
)
from .transport import (
    EmpiricalMeasure,
    Mollifier,
    mollify_to_grid,
    moment,
    w1_1d,
    w1_empirical_vs_grid,
    w1_exact,
    w1_multispecies,
    w1_sliced,
)

__all__ = [
    "CFLViolationError",
    "ConfigError",
    "DegenerateInitialDistanceError",
    "DensityGrid1D",
    "DiagnosticsSeries",
    "DimensionMismatchError",
    "EmpiricalMeasure",
    "FieldEvaluationError",
    "FieldFn",
    "GridMismatchError",
    "GridTooSmallError",
    "GridTrajectory",
    "InsufficientValuesError",
    "IntegratorConfig",
    "KernelBounds",
    "KernelMatrix",
    "KernelSpec",
    "MissingVelocitiesError",
    "ModulatedEnergy",
    "Mollifier",
    "MultiSpeciesState",
    "NoConvergenceError",
    "NormalizationError",
    "NotRegularizableWarning",
    "NUMBA_AVAILABLE",
    "OutputError",
    "PhasePoint",
    "PicardConfig",
    "PicardResult",
    "QuadratureDivergenceError",
    "SchemeMismatchError",
    "SingularEntryError",
    "SingularEvaluationError",
    "SizeCapError",
    "SpeciesCountMismatchError",
    "SpeciesEnsemble",
    "StabilityResult",
    "SwarmlimError",
    "USING_NUMBA",
    "VelocityFieldSample",
    "__version__",
    "assemble_field",
    "eval_grad",
    "eval_potential",
    "field_from_state",
    "flow_map",
    "free_energy",
    "grid_solve_1d",
    "interaction_energy",
    "kernel_bounds",
    "lp_norm",
    "macro_particle_solve",
    "material_derivative",
    "modulated_energy",
    "mollify_to_grid",
    "moment",
    "picard_solve",
    "pushforward",
    "regularize",
    "regularize_matrix",
    "second_moment_energy",
    "stability_ratio",
    "state_fields",
    "step_first_order",
    "step_second_order",
    "support_radius",
    "transport_velocity_centers",
    "velocity_alignment",
    "velocity_field",
    "w1_1d",
    "w1_empirical_vs_grid",
    "w1_exact",
    "w1_multispecies",
    "w1_sliced",
]
