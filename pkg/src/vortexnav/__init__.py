"""Time-minimal navigation around a planar point vortex.

A unit-speed vehicle moves in the plane through the rotational flow of a
single point vortex.  This package integrates the resulting geodesic flow,
classifies every launch direction in closed form, detects conjugate and
splitting points, and assembles wavefronts, spheres, and the cut locus
into an optimal synthesis.
"""

from .classify import (
    Fate,
    GeodesicType,
    RadialProfile,
    abnormal_angles,
    alpha_stars,
    classification_report,
    classify,
    discriminant_data,
    fate,
    phi,
    reeb_F,
    reeb_circle_rate,
    reeb_f,
    separatrix_theta,
    separatrix_time,
)
from .flow import (
    ExtremalState,
    IntegrationError,
    StopReason,
    Trajectory,
    abnormal_radius,
    exponential,
    hamiltonian,
    integrate_cartesian,
    integrate_compactified,
    integrate_extremal,
    unit_covector,
    write_trajectory_csv,
)
from .homotopy import (
    EvaluationFailure,
    PathStop,
    SplitSeed,
    SplittingCurve,
    ZeroPath,
    follow_path,
    polish_split,
    revalidate_splitting_curve,
    splitting_curve,
    write_splitting_csv,
)
from .jacobi import (
    ConjugateScan,
    SigmaCurve,
    conjugate_scan,
    conjugate_test,
    scan_summary,
    write_scan_csv,
)
from .model import (
    DriftRegime,
    Tolerances,
    VortexProblem,
    drift,
    drift_strength,
    feasible_transfer_time,
    load_problem,
    near_vortex_bounds,
    normalize_control_bound,
)
from .shooting import (
    BCExtremal,
    NoConvergence,
    ShootingProblem,
    SingularJacobian,
    shoot,
    solve_all,
)
from .synthesis import (
    BallType,
    CutTimeMap,
    NotFound,
    PreconditionError,
    SphereBall,
    SynthesisReport,
    Wavefront,
    cut_locus,
    sphere_and_ball,
    synthesis_report,
    value,
    wavefront,
    write_sphere_csv,
    write_wavefront_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BCExtremal",
    "BallType",
    "ConjugateScan",
    "CutTimeMap",
    "DriftRegime",
    "EvaluationFailure",
    "ExtremalState",
    "Fate",
    "GeodesicType",
    "IntegrationError",
    "NoConvergence",
    "NotFound",
    "PathStop",
    "PreconditionError",
    "RadialProfile",
    "ShootingProblem",
    "SigmaCurve",
    "SingularJacobian",
    "SphereBall",
    "SplitSeed",
    "SplittingCurve",
    "StopReason",
    "SynthesisReport",
    "Tolerances",
    "Trajectory",
    "VortexProblem",
    "Wavefront",
    "ZeroPath",
    "abnormal_angles",
    "abnormal_radius",
    "alpha_stars",
    "classification_report",
    "classify",
    "conjugate_scan",
    "conjugate_test",
    "cut_locus",
    "discriminant_data",
    "drift",
    "drift_strength",
    "exponential",
    "fate",
    "feasible_transfer_time",
    "follow_path",
    "hamiltonian",
    "integrate_cartesian",
    "integrate_compactified",
    "integrate_extremal",
    "load_problem",
    "near_vortex_bounds",
    "normalize_control_bound",
    "phi",
    "polish_split",
    "reeb_F",
    "reeb_circle_rate",
    "reeb_f",
    "revalidate_splitting_curve",
    "scan_summary",
    "separatrix_theta",
    "separatrix_time",
    "shoot",
    "solve_all",
    "sphere_and_ball",
    "splitting_curve",
    "synthesis_report",
    "unit_covector",
    "value",
    "wavefront",
    "write_scan_csv",
    "write_sphere_csv",
    "write_splitting_csv",
    "write_trajectory_csv",
    "write_wavefront_csv",
]
