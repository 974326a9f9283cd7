"""Quenching solver for singular reaction-diffusion problems on ellipses."""

__version__ = "1.0.0"

from .errors import (
    CheckpointError,
    DegenerateEllipse,
    DegenerateFit,
    FocalSingularity,
    MonotonicityViolation,
    NonpositiveDegeneracy,
    QadiError,
    SolveFailure,
    SourceOverflow,
)
from .geometry import (
    EllipseSpec,
    EllipticalMap,
    QuenchBounds,
    bounds_table,
    derive_map,
    ellipse_from_area,
    jacobian_phi,
    quench_area_bounds,
    to_cartesian,
)
from .grid import (
    AxisGrid,
    MappingReport,
    TensorGrid,
    exponential_grid,
    load_grid,
    mapping_smoothness,
    save_grid,
    uniform_grid,
)
from .operators import (
    DegeneracyField,
    OperatorSet,
    SourceModel,
    apply_C,
    apply_P,
    apply_R,
    assemble,
    capped_source,
    constant_source,
    default_source,
    eval_degeneracy,
    tau_max_bound,
)
from .stepper import StepConfig, StepState, apply_S, initial_state, pr_step
from .solver import (
    RunConfig,
    RunRecord,
    checkpoint_load,
    checkpoint_save,
    run,
)
from .verify import (
    PropertyReport,
    check_m_matrix,
    check_nonnegativity,
    check_norm_lemmas,
    convergence_order,
    verify_scheme,
)
from .experiments import (
    CriticalAreaResult,
    DegeneracyStudyResult,
    PerturbSpec,
    PerturbStats,
    critical_area_search,
    degeneracy_study,
    monte_carlo,
)
