"""Rigid-motion averaging through SE(3) -> SO(4) contraction and FL(1,2,3;4) flags."""
import math
from dataclasses import dataclass

import numpy as np

from .averaging import IrlsConfig, flag_mean, flag_median
from .errors import ContractionSingularity, EmptyInput, InvalidInput, NotOrthonormal, NumericalFailure
from .flag import FlagSignature, make_flag, orient_complete_flag
from .numerics import as_matrix, polar_factor, svd
from .stiefel import TrustRegionConfig

SO_TOL = 1e-10
REPROJECT_LIMIT = 1e-6
HORIZON_TOL = 1e-12
FL4 = FlagSignature((1, 2, 3), 4)


def orthogonality_defect(m):
    """max(|M^T M - I|, |det M - 1|)"""
    m = np.asarray(m, dtype=float)
    return max(float(np.max(np.abs(m.T @ m - np.eye(m.shape[0])))), abs(float(np.linalg.det(m)) - 1.0))


def check_special_orthogonal(m, n, tol=SO_TOL, name="matrix"):
    m = as_matrix(m, name)
    if m.shape != (n, n):
        raise InvalidInput(f"{name} must be {n}x{n}, got {m.shape}")
    dev = orthogonality_defect(m)
    if dev > tol:
        raise NotOrthonormal(dev, f"{name} is not in SO({n}) (defect {dev:.3e})")
    return m


@dataclass(frozen=True, eq=False)
class RigidMotion:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = check_special_orthogonal(self.rotation, 3, name="rotation").copy()
        t = np.asarray(self.translation, dtype=float).reshape(-1).copy()
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidInput(f"translation must be 3 finite reals, got {self.translation!r}")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def matrix(self):
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out


def _positive(value, name):
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise InvalidInput(f"{name} must be a positive finite number, got {value}")
    return value


def contract(g, lam=1.0):
    """Saletan contraction: polar factor of [[R, t/lam], [0, 1]]."""
    lam = _positive(lam, "lambda")
    a = np.eye(4)
    a[:3, :3] = g.rotation
    a[:3, 3] = g.translation / lam
    u, _, vt = svd(a)
    return u @ vt


def expand(m, lam=1.0, small_t_threshold=None):
    """Inverse contraction SO(4) -> SE(3)."""
    lam = _positive(lam, "lambda")
    m = check_special_orthogonal(m, 4, name="SO(4) matrix")
    if small_t_threshold is None:
        small_t_threshold = 1e-9 * lam
    m44 = m[3, 3]
    if abs(m44) < HORIZON_TOL:
        raise ContractionSingularity(f"M[4,4] = {m44:.3e} lies on the contraction horizon")
    t = (2.0 * lam / m44) * m[:3, 3]
    tn = float(np.linalg.norm(t))
    if tn < small_t_threshold:
        r = m[:3, :3].copy()
    else:
        _, _, vt = svd(t[None, :])
        v = vt.T
        p_perp = v[:, 1:] @ v[:, 1:].T
        try:
            r = np.linalg.solve(m44 * np.outer(t, t) / tn**2 + p_perp, m[:3, :3])
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"cannot invert the contraction block: {exc}") from exc
    dev = orthogonality_defect(r)
    if dev > REPROJECT_LIMIT:
        raise NumericalFailure(f"expanded rotation is far from SO(3) (defect {dev:.3e})")
    if dev > SO_TOL:
        r = polar_factor(r)
    return RigidMotion(r, t)


def so4_to_flag(m):
    m = check_special_orthogonal(m, 4, name="SO(4) matrix")
    return make_flag(m[:, :3], FL4)


def flag_to_so4(x):
    """Complete an FL(1,2,3;4) representative to a determinant +1 orthogonal matrix."""
    if x.signature != FL4:
        raise InvalidInput(f"flag_to_so4 needs signature {FL4}, got {x.signature}")
    b = x.rep
    for seed in (3, 2, 1, 0):
        z = np.zeros(4)
        z[seed] = 1.0
        zhat = z - b @ (b.T @ z)
        norm = np.linalg.norm(zhat)
        if norm >= 1e-12:
            break
    else:
        raise NumericalFailure("no seed vector leaves the span of the flag")
    zhat /= norm
    # second Gram-Schmidt pass for full precision when the projection was short
    zhat -= b @ (b.T @ zhat)
    zhat /= np.linalg.norm(zhat)
    m = np.column_stack([b, zhat])
    if np.linalg.det(m) < 0:
        m[:, 3] = -m[:, 3]
    return m


def pose_error(a, b, lambda_t=1.0):
    """Rotation angle of R_a^T R_b divided by pi, plus lambda_t * ||t_a - t_b||."""
    lambda_t = _positive(lambda_t, "lambda_T")
    return rotation_angle(a.rotation.T @ b.rotation) / math.pi + lambda_t * float(np.linalg.norm(a.translation - b.translation))


def rotation_angle(r):
    """Angle in [0, pi] of a rotation matrix.

    atan2 of the skew and trace parts: the same angle as arccos((tr R - 1) / 2)
    without its loss of precision near 0.
    """
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return float(math.atan2(0.5 * np.linalg.norm(skew), 0.5 * (np.trace(r) - 1.0)))


@dataclass
class MotionAverage:
    motion: RigidMotion
    report: object
    so4: np.ndarray


def average_motions_detailed(motions, weights=None, q=2, lam=1.0, mean_config=None, irls_config=None):
    if len(motions) == 0:
        raise EmptyInput("no motions given")
    if q not in (1, 2):
        raise InvalidInput(f"q must be 1 (median) or 2 (mean), got {q}")
    lam = _positive(lam, "lambda")
    flags = [so4_to_flag(contract(g, lam)) for g in motions]
    if q == 2:
        report = flag_mean(flags, weights, mean_config or TrustRegionConfig())
    else:
        report = flag_median(flags, weights, irls_config or IrlsConfig())
    oriented = orient_complete_flag(report.centroid, flags)
    m = flag_to_so4(oriented)
    return MotionAverage(expand(m, lam), report, m)


def average_motions(motions, weights=None, q=2, lam=1.0, mean_config=None, irls_config=None):
    """Chordal flag-mean (q=2) or flag-median (q=1) of rigid motions."""
    return average_motions_detailed(motions, weights, q, lam, mean_config, irls_config).motion


def average_rotations(rotations, weights=None, q=2, mean_config=None, irls_config=None):
    """Average rotations as motions with zero translation and unit contraction scale."""
    motions = [RigidMotion(r, np.zeros(3)) for r in rotations]
    out = average_motions(motions, weights, q, 1.0, mean_config, irls_config)
    if np.linalg.norm(out.translation) > 1e-8:
        raise NumericalFailure(f"rotation average produced translation {out.translation}")
    return out.rotation
