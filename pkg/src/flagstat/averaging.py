"""Averages of flag points: chordal flag-mean, IRLS flag-median and two baselines."""
import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInput
from .flag import FlagSignature, check_same_signature, distances_to, make_flag, validate_weights
from .numerics import sym_eig, thin_qr
from .stiefel import SolveReport, TrustRegionConfig, flag_mean_problem, rtr_solve


class Method(enum.Enum):
    FLAG_MEAN = "FlagMean"
    FLAG_MEDIAN = "FlagMedian"
    EUCLIDEAN_MEAN = "EuclideanMean"
    GR_MEAN = "GrMean"


@dataclass(frozen=True)
class IrlsConfig:
    epsilon: float = 1e-10
    max_iterations: int = 50
    convergence_tolerance: float = 1e-9
    inner: TrustRegionConfig = field(default_factory=TrustRegionConfig)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInput("epsilon must be > 0")
        if self.max_iterations < 1:
            raise InvalidInput("max_iterations must be >= 1")
        if not self.convergence_tolerance > 0:
            raise InvalidInput("convergence_tolerance must be > 0")


@dataclass
class AverageReport:
    centroid: object
    objectives: list
    iterations: int
    method: Method
    solves: list = field(default_factory=list)

    @property
    def objective(self):
        return self.objectives[-1]


def as_signature(point, sig):
    """Reinterpret a representative under another signature with the same d_k and d."""
    return make_flag(point.rep, sig)


def mean_objective(points, y, weights=None):
    """sum_i a_i d_c(X_i, Y)^2"""
    w = validate_weights(weights, len(points))
    return float(w @ distances_to(points, y) ** 2)


def median_objective(points, y, weights=None):
    """sum_i a_i d_c(X_i, Y)"""
    w = validate_weights(weights, len(points))
    return float(w @ distances_to(points, y))


def _solve_mean(points, w, config, init):
    problem = flag_mean_problem(points, w)
    return rtr_solve(problem, None if init is None else np.asarray(init.rep if hasattr(init, "rep") else init), config)


def flag_mean(points, weights=None, config=None, init=None):
    """Weighted chordal flag-mean via Riemannian trust regions on St(d_k, d).

    ``init`` may be a FlagPoint or an orthonormal matrix; by default the solver
    draws a random start from ``config.rng``.
    """
    sig = check_same_signature(points)
    w = validate_weights(weights, len(points))
    config = config or TrustRegionConfig()
    if len(points) == 1:
        return AverageReport(points[0], [0.0], 0, Method.FLAG_MEAN)
    report = _solve_mean(points, w, config, init)
    centroid = make_flag(report.point, sig)
    return AverageReport(centroid, [mean_objective(points, centroid, w)], report.iterations, Method.FLAG_MEAN, [report])


def irls_weights(points, y, base_weights=None, epsilon=1e-10):
    if not epsilon > 0:
        raise InvalidInput("epsilon must be > 0")
    a = validate_weights(base_weights, len(points))
    return a / np.maximum(distances_to(points, y), epsilon)


def flag_median(points, weights=None, config=None, init=None):
    """Weighted chordal flag-median by iteratively reweighted flag-means.

    Starts from the unweighted flag-mean (or ``init``), then repeats
    ``Y <- flag_mean(points, irls_weights(points, Y))`` warm-started at the
    previous iterate until the objective changes by less than the tolerance.
    """
    sig = check_same_signature(points)
    a = validate_weights(weights, len(points))
    config = config or IrlsConfig()
    if len(points) == 1:
        return AverageReport(points[0], [0.0], 0, Method.FLAG_MEDIAN)
    solves = []
    if init is None:
        start = flag_mean(points, None, config.inner)
        y = start.centroid
        solves.extend(start.solves)
    else:
        y = init if hasattr(init, "rep") else make_flag(init, sig)
    objectives = [median_objective(points, y, a)]
    it = 0
    while it < config.max_iterations:
        it += 1
        w = irls_weights(points, y, a, config.epsilon)
        # rescaling the weights leaves the minimizer unchanged and keeps the
        # inner gradient tolerance meaningful when some weights hit 1/epsilon
        report = _solve_mean(points, w / np.sum(w), config.inner, y)
        solves.append(report)
        y = make_flag(report.point, sig)
        objectives.append(median_objective(points, y, a))
        if abs(objectives[-2] - objectives[-1]) < config.convergence_tolerance:
            break
    return AverageReport(y, objectives, it, Method.FLAG_MEDIAN, solves)


def euclidean_mean_baseline(points, weights=None):
    """Weighted average of representatives projected back with thin QR."""
    sig = check_same_signature(points)
    w = validate_weights(weights, len(points))
    avg = np.einsum("p,pdk->dk", w, np.stack([p.rep for p in points])) / np.sum(w)
    centroid = make_flag(thin_qr(avg)[0], sig)
    return AverageReport(centroid, [mean_objective(points, centroid, w)], 1, Method.EUCLIDEAN_MEAN)


def gr_mean_baseline(points, weights=None):
    """Grassmannian mean of the largest subspaces, returned as a (1, ..., d_k; d) flag.

    The leading column carries the largest eigenvalue of sum_i a_i X_i X_i^T.
    """
    sig = check_same_signature(points)
    w = validate_weights(weights, len(points))
    xs = np.stack([p.rep for p in points])
    scatter = np.einsum("p,pdk,pek->de", w, xs, xs)
    _, vecs = sym_eig(scatter)
    out_sig = FlagSignature(tuple(range(1, sig.dk + 1)), sig.ambient)
    centroid = make_flag(vecs[:, : sig.dk], out_sig)
    objective = mean_objective(points, as_signature(centroid, sig), w)
    return AverageReport(centroid, [objective], 1, Method.GR_MEAN)
