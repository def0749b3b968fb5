"""Benchmark objectives on [-1, 1]^d with known minima.

Bump functions are sums of weighted Gaussians in 2D (negative weights make
wells). They lift to even ``d`` as f(x) = sum_k base(x_{2k-1}, x_{2k}) and
can be perturbed by a high-frequency cosine along each coordinate. Because
every variant is a sum of identical 2D blocks, normalization to [0, 1] only
needs the block's minimum and maximum, found on a dense grid and polished
with a bounded local optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .geometry import Domain

__all__ = ["TestFunction", "build_test_function", "DEFAULT_BUMPS", "bump_values"]

# published defaults for the 2D bump landscape (four wells of different depth)
DEFAULT_BUMPS = {
    "centers": [[0.3, 0.2], [-0.5, 0.4], [-0.3, -0.5], [0.6, -0.6]],
    "weights": [-1.0, -0.7, -0.6, -0.5],
    "widths": [0.35, 0.3, 0.25, 0.2],
}
DEFAULT_GRID = 401


def bump_values(X, centers, weights, widths) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d2 = ((X[:, None, :] - centers[None]) ** 2).sum(-1)
    return (weights * np.exp(-d2 / (2 * widths**2))).sum(-1)


@dataclass
class _Block:
    """A 2D building block: weighted Gaussians plus a per-coordinate cosine."""

    centers: np.ndarray
    weights: np.ndarray
    widths: np.ndarray
    amplitude: float = 0.0
    frequency: float = 0.0

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = bump_values(X, self.centers, self.weights, self.widths)
        if self.amplitude:
            out = out + self.amplitude * np.cos(self.frequency * X).sum(-1)
        return out

    def seminorm_bound(self, m: int) -> float:
        """Analytic upper bound on max_{|a|=m} sup |d^a block| over R^2."""
        w, s = np.abs(self.weights), self.widths
        if m == 1:
            # |d/dx_i exp(-|x|^2/2s^2)| <= exp(-1/2)/s
            bump = float(np.sum(w * math.exp(-0.5) / s))
        elif m == 2:
            # |d2/dx_i^2| <= 1/s^2 and |d2/dx_i dx_j| <= exp(-1)/s^2
            bump = float(np.sum(w / s**2))
        else:
            raise ValidationError("analytic seminorm bounds are available for m in {1, 2}")
        return bump + abs(self.amplitude) * abs(self.frequency) ** m

    def extrema(self, grid: int) -> tuple[float, np.ndarray, float]:
        """(min, argmin, max) on [-1,1]^2 via dense grid plus local polish."""
        g = np.linspace(-1, 1, grid)
        G = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        vals = self(G)
        bounds = [(-1.0, 1.0)] * 2

        def polish(sign):
            order = np.argsort(sign * vals)[:5]
            best_v, best_x = sign * vals[order[0]], G[order[0]]
            for i in order:
                res = minimize(lambda x: sign * self(x[None])[0], G[i], method="L-BFGS-B", bounds=bounds,
                               options={"ftol": 1e-15, "gtol": 1e-12})
                if res.fun < best_v:
                    best_v, best_x = float(res.fun), res.x
            return sign * best_v, np.asarray(best_x)

        fmin, xmin = polish(1.0)
        fmax, _ = polish(-1.0)
        return fmin, xmin, fmax


@dataclass
class TestFunction:
    """Normalized objective ``(raw(x) - offset) / scale`` on ``domain``.

    ``f_star`` and ``argmin`` refer to the normalized function.
    """

    __test__ = False  # not a pytest class

    kind: str
    d: int
    raw: Callable[[np.ndarray], np.ndarray]
    domain: Domain
    offset: float = 0.0
    scale: float = 1.0
    f_star: float = 0.0
    argmin: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    _seminorm: Callable[[int], float] | None = field(default=None, repr=False)

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValidationError(f"expected points of dimension {self.d}, got {X.shape[1]}")
        return (self.raw(X) - self.offset) / self.scale

    def seminorm_bound(self, m: int) -> float:
        """Analytic upper bound of the order-m seminorm of the normalized function."""
        if self._seminorm is None:
            raise ValidationError(f"no analytic seminorm for kind {self.kind!r}")
        return self._seminorm(m) / self.scale

    def to_dict(self) -> dict:
        return dict(self.params)


def _block_from(spec: dict) -> _Block:
    kind = spec.get("kind", "gaussian_bumps_2d")
    if kind == "gaussian_bumps_2d":
        p = {**DEFAULT_BUMPS, **{k: v for k, v in spec.items() if k in DEFAULT_BUMPS}}
        centers = np.asarray(p["centers"], dtype=float)
        weights = np.asarray(p["weights"], dtype=float)
        widths = np.asarray(p["widths"], dtype=float)
        if centers.ndim != 2 or centers.shape[1] != 2:
            raise ValidationError("bump centers must be a list of 2D points")
        if not (len(weights) == len(widths) == len(centers)):
            raise ValidationError("bump centers, weights and widths must have equal length")
        if np.any(widths <= 0):
            raise ValidationError("bump widths must be positive")
        return _Block(centers, weights, widths)
    if kind == "cosine_perturbed":
        base = _block_from(spec.get("base", {"kind": "gaussian_bumps_2d"}))
        if base.amplitude:
            raise ValidationError("cosine perturbation cannot be stacked")
        base.amplitude = float(spec.get("amplitude", 0.05))
        base.frequency = float(spec.get("frequency", 30.0))
        return base
    raise ValidationError(f"kind {kind!r} is not a 2D building block")


def _lift_spec(spec: dict) -> tuple[dict, int]:
    """Reduce a spec to (2D block spec, dimension)."""
    kind = spec.get("kind")
    if kind == "separable_lift":
        d = int(spec.get("d", 2))
        if d < 2 or d % 2:
            raise ValidationError(f"separable lift needs an even dimension, got d={d}")
        base = spec.get("base", {"kind": "gaussian_bumps_2d"})
        if base.get("kind") == "separable_lift":
            raise ValidationError("nested separable lifts are not supported")
        return base, d
    if kind == "cosine_perturbed" and spec.get("base", {}).get("kind") == "separable_lift":
        inner = spec["base"]
        block, d = _lift_spec(inner)
        return {"kind": "cosine_perturbed", "base": block,
                "amplitude": spec.get("amplitude", 0.05), "frequency": spec.get("frequency", 30.0)}, d
    return spec, 2


def _quadratic(spec: dict) -> TestFunction:
    center = np.atleast_1d(np.asarray(spec.get("center", [0.0, 0.0]), dtype=float))
    d = center.size
    A = spec.get("hessian", 1.0)
    A = np.asarray(A, dtype=float)
    A = A * np.eye(d) if A.ndim == 0 else A
    if A.shape != (d, d) or not np.allclose(A, A.T):
        raise ValidationError("quadratic hessian must be a symmetric d x d matrix or a scalar")
    if np.linalg.eigvalsh(A)[0] <= 0:
        raise ValidationError("quadratic hessian must be positive definite")
    dom = spec.get("domain")
    domain = Domain.from_dict(dom) if dom else Domain.cube(d)
    if not domain.contains(center):
        raise ValidationError("quadratic center must lie in the domain")

    def raw(X):
        D = X - center
        return np.einsum("ij,jk,ik->i", D, A, D)

    def seminorm(m: int) -> float:
        if m == 1:
            # sup |2 (A (x - c))_i| over the domain
            if domain.shape == "box":
                half = 0.5 * (domain.hi - domain.lo)
                return float(np.max(2 * (np.abs(A @ (domain.center - center)) + np.abs(A) @ half)))
            return float(np.max(2 * (np.abs(A @ (domain.center - center)) + domain.R * np.linalg.norm(A, axis=1))))
        if m == 2:
            return float(np.max(np.abs(2 * A)))
        return 0.0

    params = {"kind": "quadratic", "center": center.tolist(), "hessian": A.tolist(), "domain": domain.to_dict()}
    return TestFunction("quadratic", d, raw, domain, 0.0, 1.0, 0.0, center, params, seminorm)


def build_test_function(spec: dict | None = None, grid: int = DEFAULT_GRID) -> TestFunction:
    """Build a normalized test function from a spec dictionary.

    Kinds: ``gaussian_bumps_2d`` (centers, weights, widths),
    ``separable_lift`` (base, d), ``cosine_perturbed`` (base, amplitude,
    frequency) and ``quadratic`` (center, hessian, domain; not normalized).
    Set ``normalize: false`` to keep raw values.
    """
    spec = dict(spec or {"kind": "gaussian_bumps_2d"})
    kind = spec.get("kind", "gaussian_bumps_2d")
    if kind == "quadratic":
        return _quadratic(spec)
    if kind not in ("gaussian_bumps_2d", "separable_lift", "cosine_perturbed"):
        raise ValidationError(f"unknown test function kind {kind!r}")
    block_spec, d = _lift_spec(spec)
    block = _block_from(block_spec)
    k = d // 2

    def raw(X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return block(X.reshape(-1, 2)).reshape(X.shape[0], k).sum(1)

    bmin, bargmin, bmax = block.extrema(grid)
    if spec.get("normalize", True):
        offset, scale = k * bmin, k * (bmax - bmin)
    else:
        offset, scale = 0.0, 1.0
    argmin = np.tile(bargmin, k)
    params = {"kind": kind, **{key: v for key, v in spec.items() if key != "kind"}}
    return TestFunction(kind, d, raw, Domain.cube(d), offset, scale, (k * bmin - offset) / scale,
                        argmin, params, block.seminorm_bound)
