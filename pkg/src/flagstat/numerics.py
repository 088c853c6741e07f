"""Dense matrix kernels with fixed sign conventions, plus seeded random streams.

Factorizations wrap numpy/LAPACK; the wrappers pin down the sign choices so
that downstream projections are deterministic.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, NumericalFailure, RankDeficient

RANK_TOL = 1e-12
SYM_TOL = 1e-10


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array or raise InvalidInput."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInput(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} has non-finite entries")
    return arr


def max_abs(a):
    return float(np.max(np.abs(a))) if np.size(a) else 0.0


def sym(a):
    return 0.5 * (a + a.T)


def thin_qr(a):
    """Thin QR with a nonnegative diagonal in R.

    Raises RankDeficient naming the first column whose diagonal entry falls
    below ``RANK_TOL`` relative to the largest entry of ``a``.
    """
    a = as_matrix(a, "A")
    d, k = a.shape
    if d < k:
        raise InvalidInput(f"thin_qr needs rows >= cols, got {d}x{k}")
    q, r = np.linalg.qr(a, mode="reduced")
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    q = q * signs
    r = signs[:, None] * r
    scale = max_abs(a)
    diag = np.diag(r)
    bad = np.flatnonzero(diag <= RANK_TOL * scale) if scale > 0 else np.arange(k)
    if bad.size:
        raise RankDeficient(bad[0])
    return q, r


def svd(a):
    """Full SVD ``(U, s, Vt)`` with singular values in nonincreasing order."""
    a = as_matrix(a, "A")
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge: {exc}") from exc
    return u, s, vt


def sym_eig(s):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Each eigenvector is signed so that its largest-magnitude entry is positive.
    """
    s = as_matrix(s, "S")
    if s.shape[0] != s.shape[1]:
        raise InvalidInput(f"sym_eig needs a square matrix, got {s.shape}")
    if max_abs(s - s.T) > SYM_TOL * max(max_abs(s), np.finfo(float).tiny):
        raise InvalidInput("sym_eig input is not symmetric")
    try:
        w, v = np.linalg.eigh(sym(s))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigh did not converge: {exc}") from exc
    w = w[::-1]
    v = v[:, ::-1]
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(v.shape[1])]
    v = v * np.where(lead < 0, -1.0, 1.0)
    return w, v


def polar_factor(a):
    """Closest orthogonal matrix to ``a`` in Frobenius norm (U Vt of its SVD)."""
    u, _, vt = svd(a)
    return u @ vt


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Backed by numpy's counter-based Philox generator keyed through a
    SeedSequence, so distinct stream ids never overlap.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not (0 <= int(v) < 2**64):
                raise InvalidInput(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self):
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id)])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, index):
        """Derive an independent stream for sub-task ``index``."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream_id), int(index)])
        return RngStream(int(ss.generate_state(1, dtype=np.uint64)[0]), int(index))


def uniform_sample(gen, lo, hi, size):
    """Draw from U[lo, hi)."""
    if isinstance(gen, RngStream):
        gen = gen.generator()
    return gen.uniform(lo, hi, size=size)
