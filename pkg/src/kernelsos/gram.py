"""Gram matrices, jittered Cholesky factors and cross-kernel vectors.

The features of the finite-dimensional problem are the columns of the
upper-triangular factor ``R`` with ``R.T @ R = K + jitter * I``; column ``i``
plays the role of Phi_i, so ``Phi_i @ Phi_j = K_ij`` (plus jitter on the
diagonal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import pdist, squareform

from .errors import NumericalRankError, ValidationError
from .geometry import PointSet
from .kernels import KernelSpec

__all__ = ["GramFactor", "gram", "cholesky_jitter", "cross_vector", "cross_matrix", "DEFAULT_JITTERS"]

DEFAULT_JITTERS = (0.0, 1e-12, 1e-10, 1e-8, 1e-6)


def _as_points(points) -> np.ndarray:
    if isinstance(points, PointSet):
        return points.points
    return np.atleast_2d(np.asarray(points, dtype=float))


@dataclass(frozen=True)
class GramFactor:
    K: np.ndarray
    R: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return self.K.shape[0]

    def phi(self, i: int) -> np.ndarray:
        """Feature vector of sample ``i`` (column ``i`` of ``R``)."""
        return self.R[:, i]

    def dump(self, path) -> None:
        """Debug dump of (K, R, jitter); not a stable format."""
        np.savez(path, K=self.K, R=self.R, jitter=self.jitter)


def gram(spec: KernelSpec, points) -> np.ndarray:
    """Kernel matrix of ``points``; only the strict upper triangle is evaluated."""
    X = _as_points(points)
    if X.shape[0] < 1:
        raise ValidationError("gram needs at least one point")
    if X.shape[1] != spec.d:
        raise ValidationError(f"points have dimension {X.shape[1]}, kernel expects {spec.d}")
    if X.shape[0] == 1:
        return np.ones((1, 1))
    K = squareform(spec.profile(pdist(X) / spec.sigma))
    np.fill_diagonal(K, 1.0)
    return K


def _pivot_floor(n: int) -> float:
    # squared pivots below this are rounding noise, i.e. numerically singular
    return 10.0 * n * np.finfo(float).eps


def cholesky_jitter(K, schedule=DEFAULT_JITTERS) -> GramFactor:
    """Upper Cholesky of ``K + eta I`` for the first ``eta`` in ``schedule`` that works.

    A factorization is accepted only if every squared pivot clears a
    rounding-noise floor, so exactly singular matrices (duplicated points)
    are jittered even when LAPACK happens to finish.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValidationError("K must be a square matrix")
    if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
        raise ValidationError("K must be symmetric")
    n = K.shape[0]
    floor = _pivot_floor(n) * max(1.0, float(np.max(np.diag(K))))
    for eta in schedule:
        A = K + eta * np.eye(n) if eta else K
        try:
            R = cholesky(A, lower=False, check_finite=True)
        except LinAlgError:
            continue
        if np.min(np.diag(R)) ** 2 > floor:
            return GramFactor(K, R, float(eta))
    raise NumericalRankError(
        f"Cholesky failed for every jitter in {list(schedule)}; the kernel matrix is numerically "
        "singular, deduplicate near-identical points or increase the smoothness/length-scale"
    )


def cross_vector(spec: KernelSpec, points, x) -> np.ndarray:
    """q(x) with q(x)_i = k(x, x_i)."""
    X = _as_points(points)
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.d,):
        raise ValidationError(f"x must be a vector of dimension {spec.d}, got shape {x.shape}")
    return spec.matrix(X, x[None, :])[:, 0]


def cross_matrix(spec: KernelSpec, points, Y) -> np.ndarray:
    """Columns are q(y) for each row y of ``Y`` (shape n x m)."""
    return spec.matrix(_as_points(points), Y)
