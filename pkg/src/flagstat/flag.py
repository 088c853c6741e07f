"""Flag manifold data model: signatures, points, blocks and chordal distance."""
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInput,
    InvalidInput,
    NotOrthonormal,
    NumericalFailure,
    ShapeMismatch,
    SignatureMismatch,
    UnsupportedSignature,
)
from .numerics import as_matrix

ORTHO_TOL = 1e-10
RADICAND_CLAMP = 1e-12


@dataclass(frozen=True)
class FlagSignature:
    """Type ``(d_1, ..., d_k; d)`` of a flag.

    >>> FlagSignature((1, 3), 10).block_sizes
    (1, 2)
    """

    dims: tuple
    ambient: int

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "ambient", int(self.ambient))
        if not dims:
            raise InvalidInput("signature needs at least one dimension")
        prev = 0
        for x in dims:
            if x <= prev:
                raise InvalidInput(f"signature dims must be strictly increasing positive integers: {dims}")
            prev = x
        if dims[-1] >= self.ambient:
            raise InvalidInput(f"largest dim {dims[-1]} must be below ambient {self.ambient}")

    @classmethod
    def complete(cls, d):
        return cls(tuple(range(1, d)), d)

    @property
    def k(self):
        return len(self.dims)

    @property
    def dk(self):
        return self.dims[-1]

    @property
    def block_sizes(self):
        return tuple(b - a for a, b in zip((0,) + self.dims[:-1], self.dims))

    @property
    def slices(self):
        return tuple(slice(a, b) for a, b in zip((0,) + self.dims[:-1], self.dims))

    @property
    def is_complete(self):
        return self.dims == tuple(range(1, self.ambient))

    def __str__(self):
        return f"FL({','.join(map(str, self.dims))};{self.ambient})"


@dataclass(frozen=True, eq=False)
class FlagPoint:
    """A flag stored as a ``d x d_k`` matrix with orthonormal columns.

    Build through :func:`make_flag`, which validates orthonormality.
    """

    signature: FlagSignature
    rep: np.ndarray

    def block(self, j):
        return block(self, j)


def make_flag(rep, sig, tol=ORTHO_TOL):
    rep = as_matrix(rep, "representative")
    if rep.shape != (sig.ambient, sig.dk):
        raise ShapeMismatch(f"representative has shape {rep.shape}, signature {sig} needs {(sig.ambient, sig.dk)}")
    dev = float(np.max(np.abs(rep.T @ rep - np.eye(sig.dk))))
    if dev > tol:
        raise NotOrthonormal(dev)
    rep = rep.copy()
    rep.flags.writeable = False
    return FlagPoint(sig, rep)


def block(x, j):
    """Columns ``d_{j-1}+1 .. d_j`` of the representative (``j`` is 1-based)."""
    sig = x.signature
    if not 1 <= j <= sig.k:
        raise IndexError(f"block index {j} outside 1..{sig.k}")
    return x.rep[:, sig.slices[j - 1]]


def indicator(sig, j):
    if not 1 <= j <= sig.k:
        raise IndexError(f"block index {j} outside 1..{sig.k}")
    diag = np.zeros(sig.dk)
    diag[sig.slices[j - 1]] = 1.0
    return np.diag(diag)


def check_same_signature(points):
    if len(points) == 0:
        raise EmptyInput("no flag points given")
    sig = points[0].signature
    for i, p in enumerate(points):
        if p.signature != sig:
            raise SignatureMismatch(f"point {i} has signature {p.signature}, expected {sig}")
    return sig


def block_traces(x, y):
    """Per-block ``tr(X_j^T Y_j Y_j^T X_j)`` as an array of length k."""
    sig = x.signature
    return np.array([np.sum((x.rep[:, s].T @ y.rep[:, s]) ** 2) for s in sig.slices])


def _residual_radicand(x, y):
    # sum_j ||X_j - Y_j Y_j^T X_j||_F^2 equals sum_j m_j - tr(X_j^T Y_j Y_j^T X_j)
    # for orthonormal blocks but does not cancel catastrophically near d_c = 0
    total = 0.0
    for s in x.signature.slices:
        xs, ys = x.rep[:, s], y.rep[:, s]
        total += float(np.sum((xs - ys @ (ys.T @ xs)) ** 2))
    return total


def chordal_distance(x, y):
    """sqrt(sum_j m_j - tr(X_j^T Y_j Y_j^T X_j)), symmetric in its arguments."""
    if x.signature != y.signature:
        raise SignatureMismatch(f"{x.signature} vs {y.signature}")
    if np.array_equal(x.rep, y.rep):
        return 0.0
    r = 0.5 * (_residual_radicand(x, y) + _residual_radicand(y, x))
    if r < 0:
        if r < -RADICAND_CLAMP:
            raise NumericalFailure(f"chordal distance radicand {r:.3e} is negative")
        r = 0.0
    return float(np.sqrt(r))


def distances_to(points, y):
    """Chordal distances from every point to ``y`` in one vectorized pass."""
    sig = y.signature
    for i, p in enumerate(points):
        if p.signature != sig:
            raise SignatureMismatch(f"point {i} has signature {p.signature}, expected {sig}")
    xs = np.stack([p.rep for p in points])
    total = np.zeros(len(points))
    for s in sig.slices:
        ys = y.rep[:, s]
        xs_j = xs[:, :, s]
        resid = xs_j - np.einsum("dk,pkm->pdm", ys, np.einsum("dk,pdm->pkm", ys, xs_j))
        total += np.sum(resid**2, axis=(1, 2))
    return np.sqrt(total)


def orient_complete_flag(mu, data):
    """Flip column signs of ``mu`` so each agrees with the Euclidean mean of the data columns.

    Only defined for complete signatures ``(1, 2, ..., d-1; d)`` where each
    block is a single signed vector.
    """
    sig = mu.signature
    if not sig.is_complete:
        raise UnsupportedSignature(f"orientation needs a complete signature, got {sig}")
    check_same_signature([mu, *data])
    z = np.mean(np.stack([p.rep for p in data]), axis=0)
    signs = np.where(np.einsum("dj,dj->j", z, mu.rep) >= 0, 1.0, -1.0)
    return make_flag(mu.rep * signs, sig)


def validate_weights(weights, p):
    """Return weights as a float array of length ``p``; ``None`` means all ones."""
    if weights is None:
        return np.ones(p)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != p:
        raise InvalidInput(f"got {w.shape[0]} weights for {p} points")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInput("weights must be finite and nonnegative")
    if not np.any(w > 0):
        raise InvalidInput("at least one weight must be positive")
    return w
