"""Riemannian trust-region solver on the Stiefel manifold St(k, d).

Uses the embedded metric, QR retraction and a truncated (Steihaug-Toint)
conjugate-gradient inner solver. :func:`flag_mean_problem` builds the
weighted chordal flag-mean objective in this form.
"""
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInput, NumericalFailure, ShapeMismatch
from .flag import check_same_signature, validate_weights
from .numerics import RngStream, as_matrix, sym, thin_qr, uniform_sample


@dataclass(frozen=True)
class StiefelProblem:
    """Smooth cost on d x k orthonormal matrices given through Euclidean derivatives."""

    d: int
    k: int
    cost: Callable
    euclidean_grad: Callable
    euclidean_hess_action: Callable
    # optional: same values as cost on the manifold, evaluated without
    # cancellation; the solver prefers it for step acceptance and reporting
    precise_cost: Optional[Callable] = None
    projections: Optional[list] = None

    def manifold_cost(self, y):
        return (self.precise_cost or self.cost)(y)


class Termination(enum.Enum):
    GRADIENT_TOLERANCE = "GradientTolerance"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class TrustRegionConfig:
    max_outer_iterations: int = 100
    gradient_norm_tolerance: float = 1e-9
    initial_radius: Optional[float] = None  # sqrt(k) / 8
    max_radius: Optional[float] = None  # sqrt(k)
    acceptance_threshold: float = 0.1
    max_inner_cg_iterations: Optional[int] = None  # d * k
    kappa: float = 0.1
    theta: float = 1.0
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    def __post_init__(self):
        if self.max_outer_iterations < 0:
            raise InvalidInput("max_outer_iterations must be >= 0")
        if self.gradient_norm_tolerance <= 0:
            raise InvalidInput("gradient_norm_tolerance must be > 0")
        if not 0 < self.acceptance_threshold < 0.25:
            raise InvalidInput("acceptance_threshold must lie in (0, 0.25)")
        for name in ("initial_radius", "max_radius"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InvalidInput(f"{name} must be > 0")

    def radii(self, k):
        bar = self.max_radius if self.max_radius is not None else math.sqrt(k)
        init = self.initial_radius if self.initial_radius is not None else math.sqrt(k) / 8
        return min(init, bar), bar


@dataclass
class SolveReport:
    point: np.ndarray
    cost: float
    gradient_norm: float
    iterations: int
    termination: Termination
    cost_history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.termination is Termination.GRADIENT_TOLERANCE


def flag_mean_problem(points, weights=None):
    """Weighted chordal flag-mean as a Stiefel problem.

    The cost is ``sum_i a_i sum_j m_j - sum_j tr(I_j Y^T P_j Y)`` with
    ``P_j = sum_i a_i X_j^(i) X_j^(i)T``, which equals
    ``sum_i a_i d_c(X^(i), Y)^2`` for any orthonormal ``Y``.
    """
    sig = check_same_signature(points)
    w = validate_weights(weights, len(points))
    xs = np.stack([p.rep for p in points])
    slices = sig.slices
    projections = [np.einsum("p,pdi,pei->de", w, xs[:, :, s], xs[:, :, s]) for s in slices]

    const = float(np.sum(w)) * sum(sig.block_sizes)

    def cost(y):
        return const - sum(float(np.sum((p @ y[:, s]) * y[:, s])) for p, s in zip(projections, slices))

    def precise_cost(y):
        # sum_i a_i sum_j ||X_j - proj_{span Y_j} X_j||^2: equal to cost() on the
        # manifold, free of the cancellation in const - trace and unaffected by
        # roundoff-level loss of orthonormality in Y.
        total = 0.0
        for s in slices:
            ys = y[:, s]
            xs_j = xs[:, :, s]
            coef = np.linalg.solve(ys.T @ ys, np.einsum("dk,pdm->kpm", ys, xs_j).reshape(ys.shape[1], -1))
            coef = coef.reshape(ys.shape[1], len(points), -1)
            resid = xs_j - np.einsum("dk,kpm->pdm", ys, coef)
            total += float(w @ np.sum(resid**2, axis=(1, 2)))
        return total

    def egrad(y):
        g = np.empty_like(y)
        for p, s in zip(projections, slices):
            g[:, s] = -2.0 * (p @ y[:, s])
        return g

    def ehess(y, v):
        return egrad(v)

    return StiefelProblem(sig.ambient, sig.dk, cost, egrad, ehess, precise_cost=precise_cost, projections=projections)


def tangent_project(y, g):
    if y.shape != g.shape:
        raise ShapeMismatch(f"point {y.shape} and vector {g.shape} differ in shape")
    return g - y @ sym(y.T @ g)


def retract(y, v):
    """QR retraction; ``retract(y, 0)`` returns ``y`` unchanged."""
    if y.shape != v.shape:
        raise ShapeMismatch(f"point {y.shape} and vector {v.shape} differ in shape")
    if not np.any(v):
        return y.copy()
    return thin_qr(y + v)[0]


def riemannian_grad(problem, y):
    return tangent_project(y, problem.euclidean_grad(y))


def riemannian_hess(problem, y, v, egrad=None):
    if egrad is None:
        egrad = problem.euclidean_grad(y)
    return tangent_project(y, problem.euclidean_hess_action(y, v) - v @ sym(y.T @ egrad))


def random_stiefel(d, k, rng):
    """thin_qr of a d x k matrix with U[-0.5, 0.5) entries."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return thin_qr(uniform_sample(gen, -0.5, 0.5, (d, k)))[0]


def _inner(a, b):
    return float(np.sum(a * b))


def _truncated_cg(hess, grad, radius, kappa, theta, max_inner, project=None):
    """Steihaug-Toint tCG for min <g, e> + 1/2 <e, H e> subject to ||e|| <= radius.

    Returns ``(eta, H eta, hit_boundary)``.
    """
    eta = np.zeros_like(grad)
    h_eta = np.zeros_like(grad)
    r = grad.copy()
    e_pe = 0.0
    r_r = _inner(r, r)
    norm_r0 = math.sqrt(r_r)
    z_r = r_r
    delta = -r
    e_pd = 0.0
    d_pd = r_r
    model = 0.0
    for it in range(max_inner):
        h_delta = hess(delta)
        d_hd = _inner(delta, h_delta)
        alpha = z_r / d_hd if d_hd != 0 else math.inf
        e_pe_new = e_pe + 2.0 * alpha * e_pd + alpha * alpha * d_pd
        if d_hd <= 0 or e_pe_new >= radius * radius:
            tau = (-e_pd + math.sqrt(e_pd * e_pd + d_pd * (radius * radius - e_pe))) / d_pd
            return eta + tau * delta, h_eta + tau * h_delta, True
        new_eta = eta + alpha * delta
        new_h_eta = h_eta + alpha * h_delta
        new_model = _inner(new_eta, grad) + 0.5 * _inner(new_eta, new_h_eta)
        if new_model >= model:
            return eta, h_eta, False
        eta, h_eta, e_pe, model = new_eta, new_h_eta, e_pe_new, new_model
        r = r + alpha * h_delta
        if project is not None:
            # keep the residual tangent; roundoff otherwise leaks into the normal space
            r = project(r)
        r_r = _inner(r, r)
        norm_r = math.sqrt(r_r)
        if it >= 0 and norm_r <= norm_r0 * min(norm_r0 ** theta, kappa):
            return eta, h_eta, False
        z_r_old, z_r = z_r, r_r
        beta = z_r / z_r_old
        delta = -r + beta * delta
        e_pd = beta * (e_pd + alpha * d_pd)
        d_pd = z_r + beta * beta * d_pd
    return eta, h_eta, False


def rtr_solve(problem, init=None, config=None):
    """Minimize ``problem.cost`` over St(k, d) with Riemannian trust regions.

    ``init`` is an orthonormal starting matrix; when omitted a random start is
    drawn from ``config.rng``. Accepted costs never increase.
    """
    config = config or TrustRegionConfig()
    d, k = problem.d, problem.k
    if init is None:
        y = random_stiefel(d, k, config.rng)
    else:
        y = as_matrix(init, "init")
        if y.shape != (d, k):
            raise ShapeMismatch(f"init has shape {y.shape}, expected {(d, k)}")
        if np.max(np.abs(y.T @ y - np.eye(k))) > 1e-10:
            raise InvalidInput("init is not orthonormal")
        y = y.copy()
    radius, radius_max = config.radii(k)
    max_inner = config.max_inner_cg_iterations or d * k

    fy = problem.manifold_cost(y)
    eg = problem.euclidean_grad(y)
    g = tangent_project(y, eg)
    gnorm = math.sqrt(_inner(g, g))
    _check_finite(fy, gnorm)
    history = [fy]
    it = 0
    while gnorm > config.gradient_norm_tolerance and it < config.max_outer_iterations:
        it += 1
        ey = sym(y.T @ eg)

        def hess(v, y=y, ey=ey):
            return tangent_project(y, problem.euclidean_hess_action(y, v) - v @ ey)

        eta, h_eta, boundary = _truncated_cg(
            hess, g, radius, config.kappa, config.theta, max_inner, project=lambda v, y=y: tangent_project(y, v)
        )
        y_new = retract(y, eta)
        f_new = problem.manifold_cost(y_new)
        if not math.isfinite(f_new):
            raise NumericalFailure("cost is not finite at trial point")
        reg = max(1.0, abs(fy)) * np.spacing(1.0) * 1e3
        num = fy - f_new + reg
        den = -_inner(g, eta) - 0.5 * _inner(eta, h_eta) + reg
        model_decreased = den >= 0
        rho = num / den if den != 0 else -math.inf
        if rho < 0.25 or not model_decreased:
            radius /= 4.0
        elif rho > 0.75 and boundary:
            radius = min(2.0 * radius, radius_max)
        # f_new <= fy up to the same roundoff slack used to regularize rho
        if model_decreased and rho > config.acceptance_threshold and f_new <= fy + reg:
            y, fy = y_new, f_new
            eg = problem.euclidean_grad(y)
            g = tangent_project(y, eg)
            gnorm = math.sqrt(_inner(g, g))
            _check_finite(fy, gnorm)
            history.append(fy)
    term = Termination.GRADIENT_TOLERANCE if gnorm <= config.gradient_norm_tolerance else Termination.MAX_ITERATIONS
    return SolveReport(y, fy, gnorm, it, term, history)


def _check_finite(f, gnorm):
    if not (math.isfinite(f) and math.isfinite(gnorm)):
        raise NumericalFailure("non-finite cost or gradient")
