"""Search domains, point-set generation and fill-distance estimates.

A :class:`Domain` is either a Euclidean ball or an axis-aligned box. Both
carry an outer radius ``R`` (half the diameter) and an inner radius ``r``
such that the domain is (up to its boundary) a union of balls of radius
``r``; these two numbers drive the fill-distance bound and the certificate
preconditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import UnsupportedDimensionError, ValidationError

__all__ = [
    "Domain",
    "PointSet",
    "FillDistanceBound",
    "sample_uniform",
    "sample_halton",
    "halton_unit",
    "fill_distance_empirical",
    "fill_distance_bound",
    "first_primes",
]


def first_primes(k: int) -> list[int]:
    """Return the first ``k`` primes."""
    primes: list[int] = []
    cand = 2
    while len(primes) < k:
        if all(cand % p for p in primes if p * p <= cand):
            primes.append(cand)
        cand += 1
    return primes


# Halton dimensions beyond ~30 show strong correlations between axes; 64 is a
# generous cap that still covers every experiment here.
HALTON_MAX_DIM = 64
_PRIMES = first_primes(HALTON_MAX_DIM)


@dataclass(frozen=True)
class Domain:
    """A ball or an axis-aligned box in R^d.

    Use :meth:`ball` or :meth:`box` rather than the raw constructor.
    """

    shape: str
    center: np.ndarray
    R: float
    r: float
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    @classmethod
    def ball(cls, center, radius: float, r: float | None = None) -> "Domain":
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.ndim != 1 or center.size == 0:
            raise ValidationError("ball center must be a non-empty vector")
        radius = float(radius)
        if not radius > 0:
            raise ValidationError(f"ball radius must be positive, got {radius}")
        r = radius if r is None else float(r)
        if not 0 < r <= radius:
            raise ValidationError(f"inner radius must satisfy 0 < r <= R, got r={r}, R={radius}")
        center.setflags(write=False)
        return cls("ball", center, radius, r)

    @classmethod
    def box(cls, lo, hi, r: float | None = None) -> "Domain":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise ValidationError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValidationError("box requires lo < hi componentwise")
        R = 0.5 * float(np.linalg.norm(hi - lo))
        r_max = 0.5 * float(np.min(hi - lo))
        r = r_max if r is None else float(r)
        if not 0 < r <= r_max:
            raise ValidationError(f"inner radius must satisfy 0 < r <= {r_max}, got {r}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        center = 0.5 * (lo + hi)
        center.setflags(write=False)
        return cls("box", center, R, r, lo, hi)

    @classmethod
    def cube(cls, d: int, half_width: float = 1.0) -> "Domain":
        """The box [-half_width, half_width]^d."""
        return cls.box(-half_width * np.ones(d), half_width * np.ones(d))

    @property
    def d(self) -> int:
        return int(self.center.size)

    @property
    def diameter(self) -> float:
        return 2.0 * self.R

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        if self.shape == "box":
            return np.array(self.lo), np.array(self.hi)
        return self.center - self.R, self.center + self.R

    def contains(self, x, tol: float = 1e-12) -> np.ndarray | bool:
        """Closed-set membership; vectorized over the leading axis."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValidationError(f"expected points of dimension {self.d}, got {x.shape[-1]}")
        if self.shape == "ball":
            inside = np.linalg.norm(x - self.center, axis=-1) <= self.R * (1 + tol)
        else:
            slack = tol * (self.hi - self.lo)
            inside = np.all((x >= self.lo - slack) & (x <= self.hi + slack), axis=-1)
        return inside if inside.ndim else bool(inside)

    def project(self, x) -> np.ndarray:
        """Euclidean projection: radial for balls, componentwise clamp for boxes."""
        x = np.asarray(x, dtype=float)
        if self.shape == "box":
            return np.clip(x, self.lo, self.hi)
        delta = x - self.center
        norm = np.linalg.norm(delta, axis=-1, keepdims=True)
        scale = np.where(norm > self.R, self.R / np.maximum(norm, 1e-300), 1.0)
        return self.center + delta * scale

    def to_dict(self) -> dict:
        if self.shape == "ball":
            return {"shape": "ball", "center": self.center.tolist(), "R": self.R, "r": self.r}
        return {"shape": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist(), "r": self.r}

    @classmethod
    def from_dict(cls, data: dict) -> "Domain":
        shape = data.get("shape")
        if shape == "ball":
            return cls.ball(data["center"], data["R"], data.get("r"))
        if shape == "box":
            return cls.box(data["lo"], data["hi"], data.get("r"))
        raise ValidationError(f"unknown domain shape {shape!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Domain):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(repr(self.to_dict()))


@dataclass
class PointSet:
    """Evaluation points in generation order.

    ``seed`` is None for deterministic (quasi-random) sequences; ``sampler``
    records how the points were produced so results stay reproducible.
    """

    points: np.ndarray
    seed: int | None = None
    sampler: str = "uniform"
    skip: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _uniform_draw(domain: Domain, n: int, rng: np.random.Generator) -> np.ndarray:
    d = domain.d
    if domain.shape == "box":
        return domain.lo + (domain.hi - domain.lo) * rng.random((n, d))
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = domain.R * rng.random(n) ** (1.0 / d)
    return domain.center + direction * radius[:, None]


def sample_uniform(domain: Domain, n: int, seed: int, within: Domain | None = None) -> PointSet:
    """Draw ``n`` i.i.d. uniform points from ``domain``.

    Balls use a normalized Gaussian direction times ``R * U**(1/d)``, which is
    exact. When ``within`` is given, draws are restricted to the intersection
    of both domains by rejection.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = _rng(seed)
    if within is None:
        pts = _uniform_draw(domain, n, rng)
    else:
        if within.d != domain.d:
            raise ValidationError("domains must share a dimension")
        chunks, have = [], 0
        for _ in range(10_000):
            cand = _uniform_draw(domain, max(2 * (n - have), 64), rng)
            cand = cand[within.contains(cand)]
            chunks.append(cand)
            have += len(cand)
            if have >= n:
                break
        else:
            raise ValidationError("intersection of the two domains is (nearly) empty")
        pts = np.concatenate(chunks)[:n]
    return PointSet(pts, seed=seed, sampler="uniform")


def _radical_inverse(index: np.ndarray, base: int) -> np.ndarray:
    index = index.astype(np.int64).copy()
    out = np.zeros(index.shape, dtype=float)
    scale = 1.0 / base
    while np.any(index > 0):
        out += scale * (index % base)
        index //= base
        scale /= base
    return out


def halton_unit(n: int, d: int, skip: int = 0) -> np.ndarray:
    """First ``n`` Halton points in [0, 1)^d after ``skip`` burn-in.

    The sequence starts at index 1 (index 0 would be the origin), so with
    ``skip=0`` base 2 yields 1/2, 1/4, 3/4, ...
    """
    if d > HALTON_MAX_DIM:
        raise UnsupportedDimensionError(
            f"Halton sequence supports d <= {HALTON_MAX_DIM}, got d={d}"
        )
    if d < 1:
        raise ValidationError("d must be >= 1")
    idx = np.arange(skip + 1, skip + n + 1)
    return np.column_stack([_radical_inverse(idx, b) for b in _PRIMES[:d]])


def sample_halton(domain: Domain, n: int, skip: int = 0) -> PointSet:
    """Halton points affinely mapped to the bounding box of ``domain``.

    For balls, points outside the ball are dropped while keeping sequence
    order, and the sequence is extended until ``n`` points remain.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    lo, hi = domain.bounding_box()
    if domain.shape == "box":
        pts = lo + (hi - lo) * halton_unit(n, domain.d, skip)
        return PointSet(pts, seed=None, sampler="halton", skip=skip)
    kept, cursor = [], skip
    total = 0
    while total < n:
        batch = max(2 * (n - total), 64)
        cand = lo + (hi - lo) * halton_unit(batch, domain.d, cursor)
        cursor += batch
        cand = cand[domain.contains(cand)]
        kept.append(cand)
        total += len(cand)
    return PointSet(np.concatenate(kept)[:n], seed=None, sampler="halton", skip=skip)


def fill_distance_empirical(
    points: PointSet | np.ndarray,
    domain: Domain,
    probes: int | None = None,
    seed: int = 0,
) -> float:
    """Monte-Carlo estimate of the fill distance of ``points`` in ``domain``.

    Returns the largest nearest-sample distance over uniform probe points.
    This is a lower bound of the true fill distance and converges to it as
    the number of probes grows. ``probes`` defaults to ``50 * n``.
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, float))
    if pts.size == 0 or pts.shape[0] == 0:
        raise ValidationError("fill distance of an empty point set is undefined")
    if probes is None:
        probes = 50 * pts.shape[0]
    if probes < 1:
        raise ValidationError("probes must be >= 1")
    tree = cKDTree(pts)
    rng = _rng(seed)
    best = 0.0
    # chunked to bound memory for large probe counts
    remaining = probes
    while remaining > 0:
        m = min(remaining, 200_000)
        y = _uniform_draw(domain, m, rng)
        dist, _ = tree.query(y)
        best = max(best, float(dist.max()))
        remaining -= m
    return best


class FillDistanceBound(NamedTuple):
    value: float
    threshold_ok: bool
    threshold: float


def fill_distance_bound(n: int, domain: Domain, delta: float) -> FillDistanceBound:
    """High-probability fill-distance bound for ``n`` uniform points.

    With probability at least ``1 - delta``,
    ``h <= 11 R n^(-1/d) (log(n/delta) + d log(2R/r))^(1/d)``, provided
    ``n >= 2 (6R/r)^d (log(2/delta) + 2 d log(4R/r))``; ``threshold_ok``
    reports whether ``n`` clears that size requirement.
    """
    if not 0 < delta < 1:
        raise ValidationError(f"delta must lie in (0, 1), got {delta}")
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    d, R, r = domain.d, domain.R, domain.r
    value = 11.0 * R * n ** (-1.0 / d) * (math.log(n / delta) + d * math.log(2 * R / r)) ** (1.0 / d)
    threshold = 2.0 * (6 * R / r) ** d * (math.log(2 / delta) + 2 * d * math.log(4 * R / r))
    return FillDistanceBound(value, n >= threshold, threshold)
