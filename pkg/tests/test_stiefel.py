import numpy as np
import pytest

from flagstat import FlagSignature, TrustRegionConfig, flag_mean_problem, rtr_solve
from flagstat.errors import InvalidInput, ShapeMismatch
from flagstat.flag import chordal_distance, make_flag
from flagstat.numerics import RngStream, sym
from flagstat.stiefel import (
    StiefelProblem,
    Termination,
    random_stiefel,
    retract,
    riemannian_grad,
    riemannian_hess,
    tangent_project,
)

from conftest import near_flag, random_flag


def problem_and_points(gen, sig=FlagSignature((1, 3), 8), p=6, weights=None):
    pts = [random_flag(gen, sig) for _ in range(p)]
    return flag_mean_problem(pts, weights), pts


def test_cost_equals_weighted_squared_distances(gen):
    sig = FlagSignature((1, 3), 8)
    w = gen.uniform(0.1, 2, 6)
    prob, pts = problem_and_points(gen, sig, 6, w)
    y = random_stiefel(8, 3, RngStream(1))
    expected = sum(a * chordal_distance(x, make_flag(y, sig)) ** 2 for a, x in zip(w, pts))
    assert prob.cost(y) == pytest.approx(expected, rel=1e-12)
    assert prob.precise_cost(y) == pytest.approx(expected, rel=1e-12)


def test_euclidean_gradient_fd(gen):
    prob, _ = problem_and_points(gen)
    y = gen.standard_normal((8, 3))
    g = prob.euclidean_grad(y)
    h = 1e-6
    fd = np.zeros_like(y)
    for idx in np.ndindex(*y.shape):
        e = np.zeros_like(y)
        e[idx] = h
        fd[idx] = (prob.cost(y + e) - prob.cost(y - e)) / (2 * h)
    assert np.linalg.norm(fd - g) / np.linalg.norm(g) < 1e-6


def test_euclidean_hessian_is_linear_and_constant(gen):
    prob, _ = problem_and_points(gen)
    y1, y2 = gen.standard_normal((2, 8, 3))
    v, w = gen.standard_normal((2, 8, 3))
    assert np.allclose(prob.euclidean_hess_action(y1, v), prob.euclidean_hess_action(y2, v))
    assert np.allclose(prob.euclidean_hess_action(y1, 2 * v + w), 2 * prob.euclidean_hess_action(y1, v) + prob.euclidean_hess_action(y1, w))


def test_tangent_projection(gen):
    y = random_stiefel(8, 3, gen)
    v = tangent_project(y, gen.standard_normal((8, 3)))
    assert np.allclose(sym(y.T @ v), 0, atol=1e-14)
    assert np.allclose(tangent_project(y, v), v)
    with pytest.raises(ShapeMismatch):
        tangent_project(y, np.zeros((8, 2)))


def test_retraction_properties(gen):
    y = random_stiefel(8, 3, gen)
    assert np.array_equal(retract(y, np.zeros_like(y)), y)
    v = tangent_project(y, gen.standard_normal((8, 3)))
    v /= np.linalg.norm(v)
    errs = []
    for t in (1e-2, 1e-3):
        r = retract(y, t * v)
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-14)
        errs.append(np.linalg.norm(r - (y + t * v)))
    # second-order agreement with the straight line
    assert errs[1] < errs[0] / 50


def test_riemannian_gradient_matches_fd_along_curves(gen):
    prob, _ = problem_and_points(gen)
    y = random_stiefel(8, 3, gen)
    g = riemannian_grad(prob, y)
    for _ in range(5):
        v = tangent_project(y, gen.standard_normal((8, 3)))
        h = 1e-5
        fd = (prob.cost(retract(y, h * v)) - prob.cost(retract(y, -h * v))) / (2 * h)
        assert fd == pytest.approx(np.sum(g * v), rel=1e-6)


def test_riemannian_hessian_symmetric_on_tangent_space(gen):
    prob, _ = problem_and_points(gen)
    y = random_stiefel(8, 3, gen)
    u = tangent_project(y, gen.standard_normal((8, 3)))
    v = tangent_project(y, gen.standard_normal((8, 3)))
    hu, hv = riemannian_hess(prob, y, u), riemannian_hess(prob, y, v)
    assert np.sum(hu * v) == pytest.approx(np.sum(hv * u), rel=1e-10)


def test_rtr_monotone_and_converges(gen):
    sig = FlagSignature((1, 3), 10)
    c = random_flag(gen, sig)
    pts = [near_flag(gen, c, 0.05) for _ in range(30)]
    rep = rtr_solve(flag_mean_problem(pts), None, TrustRegionConfig(rng=RngStream(3)))
    assert rep.converged and rep.termination is Termination.GRADIENT_TOLERANCE
    assert rep.gradient_norm <= 1e-9
    assert all(b <= a + 1e-12 for a, b in zip(rep.cost_history, rep.cost_history[1:]))
    assert np.allclose(rep.point.T @ rep.point, np.eye(3), atol=1e-12)


def test_rtr_iteration_cap():
    gen = np.random.default_rng(5)
    prob, _ = problem_and_points(gen)
    rep = rtr_solve(prob, None, TrustRegionConfig(max_outer_iterations=1, rng=RngStream(1)))
    assert rep.iterations == 1
    assert rep.termination is Termination.MAX_ITERATIONS


def test_rtr_deterministic_for_fixed_stream(gen):
    prob, _ = problem_and_points(gen)
    a = rtr_solve(prob, None, TrustRegionConfig(rng=RngStream(9)))
    b = rtr_solve(prob, None, TrustRegionConfig(rng=RngStream(9)))
    assert np.array_equal(a.point, b.point)


def test_rtr_generic_problem_rayleigh_quotient(gen):
    # maximize tr(Y^T A Y): minimizer spans the top eigenvectors
    b = gen.standard_normal((6, 6))
    a = b @ b.T
    prob = StiefelProblem(6, 2, lambda y: -np.sum(y * (a @ y)), lambda y: -2 * a @ y, lambda y, v: -2 * a @ v)
    rep = rtr_solve(prob, None, TrustRegionConfig(rng=RngStream(2)))
    top = np.linalg.eigh(a)[1][:, -2:]
    assert np.linalg.norm(top @ top.T - rep.point @ rep.point.T) < 1e-7


def test_rtr_rejects_bad_init(gen):
    prob, _ = problem_and_points(gen)
    with pytest.raises(ShapeMismatch):
        rtr_solve(prob, np.eye(8)[:, :2])
    with pytest.raises(InvalidInput):
        rtr_solve(prob, 2 * np.eye(8)[:, :3])


def test_config_validation():
    with pytest.raises(InvalidInput):
        TrustRegionConfig(acceptance_threshold=0.5)
    with pytest.raises(InvalidInput):
        TrustRegionConfig(gradient_norm_tolerance=0)
    assert TrustRegionConfig().radii(4) == (0.25, 2.0)
