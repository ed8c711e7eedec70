"""Dense linear-algebra kernels shared by the estimation code.

Conventions used throughout the package:

* singular values are reported in ASCENDING order, so the leading columns
  of the left singular basis span the least-excited directions (the left
  null space, for rank-deficient input);
* sample covariances divide by N, not N - 1;
* principal (canonical) angles are returned in degrees, ascending.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, InsufficientData, InvalidInput, RankError

# Relative threshold under which a singular value counts as zero.
RANK_RTOL = 1e-12


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float array, rejecting non-finite entries."""
    out = np.asarray(a, dtype=float)
    if out.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {out.shape}")
    if out.size and not np.isfinite(out).all():
        raise InvalidInput(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True, eq=False)
class SvdResult:
    """Full SVD with ascending singular values.

    ``singular_values`` has one entry per column of ``left_vectors`` (i.e.
    per row of the input), zero-padded at the front for rectangular or
    rank-deficient input.  The k-th smallest singular value pairs with
    ``left_vectors[:, k]``; right vectors pair from the end, so the largest
    value pairs with the last column of both bases.
    """

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        m = self.left_vectors.shape[0]
        n = self.right_vectors.shape[0]
        k = min(m, n)
        u = self.left_vectors[:, m - k:]
        v = self.right_vectors[:, n - k:]
        return (u * self.singular_values[m - k:]) @ v.T


def svd_full(a) -> SvdResult:
    """Full singular value decomposition in the ascending convention."""
    a = as_matrix(a)
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    m, n = a.shape
    padded = np.zeros(m)
    padded[: min(m, n)] = s
    return SvdResult(
        left_vectors=u[:, ::-1],
        singular_values=padded[::-1],
        right_vectors=vt[::-1].T,
    )


def left_null_basis(a, k: int) -> np.ndarray:
    """Orthonormal basis for the k least-excited left directions of ``a``.

    For a matrix of rank ``rows - k`` this is the left null space; for
    noisy input it is simply the k left singular vectors with the smallest
    singular values.  No rank check is performed.
    """
    a = as_matrix(a)
    if not 0 <= k <= a.shape[0]:
        raise DimensionError(f"cannot take {k} null directions from {a.shape[0]} rows")
    return svd_full(a).left_vectors[:, :k].copy()


def sample_covariance(series) -> np.ndarray:
    """Mean-centered second-moment matrix of a row-per-sample series (1/N)."""
    series = as_matrix(series, "series")
    n = series.shape[0]
    if n < 2:
        raise InsufficientData(f"need at least 2 samples, got {n}")
    centered = series - series.mean(axis=0)
    cov = centered.T @ centered / n
    return (cov + cov.T) / 2.0


def canonical_angles(a, b) -> np.ndarray:
    """Principal angles between the column spans of ``a`` and ``b``, in degrees.

    Both inputs must have full column rank; the result is ascending and
    invariant to right-multiplication of either argument by a nonsingular
    matrix.
    """
    qa = _orthonormal_span(as_matrix(a, "a"))
    qb = _orthonormal_span(as_matrix(b, "b"))
    if qa.shape[0] != qb.shape[0]:
        raise DimensionError(
            f"subspaces live in different ambient dimensions: {qa.shape[0]} vs {qb.shape[0]}"
        )
    cosines = np.linalg.svd(qa.T @ qb, compute_uv=False)
    angles = np.degrees(np.arccos(np.clip(cosines, 0.0, 1.0)))
    return np.sort(angles)


def _orthonormal_span(a: np.ndarray) -> np.ndarray:
    if a.shape[1] == 0 or a.shape[1] > a.shape[0]:
        raise DimensionError(f"basis shape {a.shape} cannot span a proper subspace")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s[-1] <= RANK_RTOL * max(s[0], 1e-300):
        raise RankError("basis matrix is column-rank deficient")
    return u


def pseudo_inverse(p) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with a 1e-12 relative cutoff."""
    return np.linalg.pinv(as_matrix(p), rcond=RANK_RTOL)


def frobenius_distance(a, b) -> float:
    """Frobenius norm of the difference of two equally shaped matrices."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, "fro"))


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Average a nearly symmetric matrix with its transpose."""
    return (a + a.T) / 2.0
