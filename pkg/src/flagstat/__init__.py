"""Chordal flag-means and flag-medians, with robust rigid-motion averaging."""
from .averaging import (
    AverageReport,
    IrlsConfig,
    Method,
    euclidean_mean_baseline,
    flag_mean,
    flag_median,
    gr_mean_baseline,
    irls_weights,
    mean_objective,
    median_objective,
)
from .errors import (
    ContractionSingularity,
    EmptyInput,
    FlagstatError,
    InvalidInput,
    NotOrthonormal,
    NumericalFailure,
    RankDeficient,
    ShapeMismatch,
    SignatureMismatch,
    UnsupportedSignature,
)
from .flag import FlagPoint, FlagSignature, chordal_distance, distances_to, make_flag, orient_complete_flag
from .motion import (
    RigidMotion,
    average_motions,
    average_rotations,
    contract,
    expand,
    flag_to_so4,
    pose_error,
    so4_to_flag,
)
from .numerics import RngStream
from .stiefel import SolveReport, StiefelProblem, TrustRegionConfig, flag_mean_problem, rtr_solve

__version__ = "0.1.0"
