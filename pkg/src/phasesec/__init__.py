"""Numerical detection of integrability obstructions via plane sections.

The package integrates long trajectories of constrained mechanical
systems, intersects them with affine planes in a reduced 4-dimensional
phase space, and classifies the resulting intersection clouds: clouds
that stay point-like are consistent with an extra conserved quantity,
clouds that fill out curves rule one out. A parameter-grid scanner
maps where each behaviour occurs.
"""

from .errors import (
    PhasesecError,
    SingularConstraintSystem,
    CoordinateSingularity,
    StepSizeUnderflow,
    ProjectionDiverged,
    DegenerateSegment,
    ReductionInvalid,
    DegenerateWindow,
    ConfigError,
)
from .angles import wrap_angle, wrap_coords, wrapped_distance
from .systems import (
    DynamicalSystem,
    CallableSystem,
    PendulumParams,
    CartesianState,
    PendulumSystem,
    pendulum_rhs,
    pendulum_energy,
    pendulum_angular_momentum,
    constraint_values,
    constraint_rates,
    constraint_jacobian,
    SatelliteParams,
    SatelliteState,
    SatelliteSystem,
    satellite_hamiltonian,
    satellite_full_hamiltonian,
    satellite_rhs,
)
from .reduction import ReducedState, reduce_state, segment_angles, embed
from .integrate import (
    IntegratorConfig,
    DenseSegment,
    TrajectorySample,
    TrajectorySummary,
    integrate_trajectory,
    step,
)
from .sections import (
    PlaneSpec,
    SectionCloud,
    SectionCollector,
    Crossing,
    plane_basis,
    plane_coords,
    default_planes,
    detect_crossing,
    collect_section,
    collect_sections,
    FunctionSegment,
    function_trajectory,
)
from .classify import (
    VerdictLabel,
    Verdict,
    ClassifierConfig,
    classify_points,
    classify,
    cluster_points,
    correlation_dimension,
    obstruction_found,
)
from .config import (
    RunConfig,
    load_config,
    config_from_record,
    default_config_text,
)
from .figures import (
    render_scatter_svg,
    render_heatmap_svg,
    render_marginal_svg,
)
from .persist import (
    canonical_json,
    write_text_atomic,
    write_json_atomic,
    write_csv_atomic,
)
from .kamscan import (
    ScanConfig,
    ScanCell,
    ScanResult,
    sample_initial_state,
    run_cell,
    scan_grid,
)

__version__ = "0.1.0"

__all__ = [
    "PhasesecError",
    "SingularConstraintSystem",
    "CoordinateSingularity",
    "StepSizeUnderflow",
    "ProjectionDiverged",
    "DegenerateSegment",
    "ReductionInvalid",
    "DegenerateWindow",
    "ConfigError",
    "wrap_angle",
    "wrap_coords",
    "wrapped_distance",
    "DynamicalSystem",
    "CallableSystem",
    "PendulumParams",
    "CartesianState",
    "PendulumSystem",
    "pendulum_rhs",
    "pendulum_energy",
    "pendulum_angular_momentum",
    "constraint_values",
    "constraint_rates",
    "constraint_jacobian",
    "SatelliteParams",
    "SatelliteState",
    "SatelliteSystem",
    "satellite_hamiltonian",
    "satellite_full_hamiltonian",
    "satellite_rhs",
    "ReducedState",
    "reduce_state",
    "segment_angles",
    "embed",
    "IntegratorConfig",
    "DenseSegment",
    "TrajectorySample",
    "TrajectorySummary",
    "integrate_trajectory",
    "step",
    "PlaneSpec",
    "SectionCloud",
    "SectionCollector",
    "Crossing",
    "plane_basis",
    "plane_coords",
    "default_planes",
    "detect_crossing",
    "collect_section",
    "collect_sections",
    "FunctionSegment",
    "function_trajectory",
    "VerdictLabel",
    "Verdict",
    "ClassifierConfig",
    "classify_points",
    "classify",
    "cluster_points",
    "correlation_dimension",
    "obstruction_found",
    "ScanConfig",
    "ScanCell",
    "ScanResult",
    "sample_initial_state",
    "run_cell",
    "scan_grid",
    "RunConfig",
    "load_config",
    "config_from_record",
    "default_config_text",
    "render_scatter_svg",
    "render_heatmap_svg",
    "render_marginal_svg",
    "canonical_json",
    "write_text_atomic",
    "write_json_atomic",
    "write_csv_atomic",
    "__version__",
]
