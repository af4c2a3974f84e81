"""Numerical workbench for conformal Lorentzian geometry.

Builds metric models (power-law cosmologies, flat space, user-defined
diagonal metrics), integrates null geodesics, equips them with projective
parameters, and estimates a conformally invariant pseudodistance by
optimizing chains of projectively parametrized null geodesic links.
"""

from .errors import (
    CriticalPoint,
    DegenerateMetric,
    EmptySample,
    ExpressionParseError,
    GeometryError,
    ImmediateExit,
    InvalidChain,
    NotNull,
    OutOfDomain,
    OutOfInterval,
    PointOffArc,
    SignatureError,
    SingularTransform,
    UnknownScenario,
    UnsupportedDimension,
    ZeroSpatialPart,
)
from .expressions import compile_diagonal_metric, compile_expression
from .geodesic import (
    EndFlag,
    GeodesicTrajectory,
    ShootSpec,
    SplineTrajectory,
    curve_geodesic_residual,
    export_trajectory_csv,
    geodesic_residual,
    maximal_affine_domain,
    ngc_along,
    shoot,
    shoot_null,
)
from .kobayashi import (
    Certificate,
    ChainLink,
    ChainReport,
    DistanceEstimate,
    EstimateStatus,
    KobayashiChain,
    SearchConfig,
    certify_zero,
    chain_length,
    distance_matrix_csv,
    distance_report,
    estimate_distance,
    estimate_refine_triangle,
    make_link,
    save_distance_report,
    segment_cost,
    validate_chain,
)
from .manifold import (
    ConditionReport,
    ConformalModel,
    MetricModel,
    SampleSpec,
    check_ncc,
    christoffel_at,
    conformal_model,
    einstein_de_sitter,
    einstein_residual_at,
    frw_power,
    inverse_metric,
    metric_at,
    minkowski,
    minkowski_halfspace,
    ncc_at,
    null_project,
    ricci_at,
    scalar_curvature_at,
)
from .projective import (
    ArcKind,
    DevelopmentArc,
    HomogeneousParameter,
    Moebius,
    ProjectivePoint,
    arc_distance,
    cross_ratio,
    curvature_along,
    development_arc,
    poincare_distance,
    projective_parameter,
    schwarzian,
    solve_companion,
)
from .workbench import (
    CheckResult,
    ModelSpec,
    ScenarioConfig,
    ScenarioReport,
    build_model,
    eds_conformal_map,
    pullback_check,
    pulled_back_halfspace,
    run_scenario,
)

__version__ = "0.1.0"
