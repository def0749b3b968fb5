"""Sobolev (Matern-type) kernels with exact normalization, and bound constants.

The kernel of smoothness ``s`` on R^d is

    k(x, y) = c_s * rho**nu * K_nu(rho),   rho = |x - y| / sigma,

with ``nu = s - d/2``, ``K_nu`` the modified Bessel function of the second
kind and ``c_s = 2**(1 + d/2 - s) / Gamma(s - d/2)``, which makes
``k(x, x) = 1``. Half-integer ``nu`` reduces to a polynomial times
``exp(-rho)``; other orders go through :func:`scipy.special.kv`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import kv

from .errors import PreconditionError, UnsupportedOrderError, ValidationError

__all__ = [
    "KernelSpec",
    "KernelConstants",
    "trace_constants",
    "c0_constant",
    "halfint_coefficients",
    "max_order",
]


def _is_half_integer(nu: float) -> bool:
    return abs(2 * nu - round(2 * nu)) < 1e-12 and round(2 * nu) % 2 == 1


def halfint_coefficients(p: int) -> np.ndarray:
    """Polynomial coefficients b_j (ascending) with k(rho) = exp(-rho) sum_j b_j rho^j
    for nu = p + 1/2, normalized so that b_0 = 1.

    Uses the finite series of K_{p+1/2}: the rho^(p-i) coefficient is
    proportional to (p+i)! / (i! (p-i)! 2^i).
    """
    raw = np.array(
        [math.factorial(p + i) / (math.factorial(i) * math.factorial(p - i) * 2.0**i) for i in range(p + 1)]
    )
    # raw[i] multiplies rho^(p-i); reverse to ascending powers
    asc = raw[::-1]
    return asc / asc[0]


@dataclass(frozen=True)
class KernelSpec:
    """Sobolev kernel of smoothness ``s`` in dimension ``d`` with length-scale ``sigma``.

    ``allow_bessel=False`` restricts evaluation to the half-integer closed
    forms and raises :class:`UnsupportedOrderError` otherwise.
    """

    d: int
    s: float
    sigma: float = 1.0
    allow_bessel: bool = True
    _coef: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValidationError(f"dimension must be a positive integer, got {self.d}")
        if not self.s > self.d / 2:
            raise ValidationError(f"smoothness must satisfy s > d/2, got s={self.s}, d={self.d}")
        if not self.sigma > 0:
            raise ValidationError(f"length-scale must be positive, got {self.sigma}")
        if _is_half_integer(self.nu):
            object.__setattr__(self, "_coef", halfint_coefficients(int(round(self.nu - 0.5))))
        elif not self.allow_bessel:
            raise UnsupportedOrderError(
                f"order nu={self.nu} is not a half-integer and the Bessel backend is disabled"
            )

    @classmethod
    def matern(cls, nu: float, d: int, sigma: float = 1.0, **kw) -> "KernelSpec":
        """Build the spec from the Matern order ``nu`` instead of ``s``."""
        return cls(d=d, s=nu + d / 2, sigma=sigma, **kw)

    @property
    def nu(self) -> float:
        return self.s - self.d / 2

    @property
    def c_s(self) -> float:
        return 2.0 ** (1 - self.nu) / math.gamma(self.nu)

    @property
    def closed_form(self) -> bool:
        return self._coef is not None

    def profile(self, rho) -> np.ndarray:
        """Radial profile as a function of the scaled distance ``rho >= 0``."""
        rho = np.asarray(rho, dtype=float)
        if self._coef is not None:
            return np.exp(-rho) * np.polynomial.polynomial.polyval(rho, self._coef)
        return self.profile_bessel(rho)

    def profile_bessel(self, rho) -> np.ndarray:
        """Profile through the general Bessel backend, any real order."""
        rho = np.asarray(rho, dtype=float)
        nu = self.nu
        safe = np.where(rho > 0, rho, 1.0)
        # log-space product avoids overflow of c_s for large nu
        logc = (1 - nu) * math.log(2.0) - math.lgamma(nu)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            val = np.exp(logc + nu * np.log(safe)) * kv(nu, safe)
        val = np.where(np.isfinite(val), val, 0.0)
        return np.where(rho > 0, val, 1.0)

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValidationError(f"expected vectors of dimension {self.d}, got {x.shape[-1]}")
        return x

    def eval(self, x, y) -> float | np.ndarray:
        """k(x, y), broadcasting over leading axes."""
        x, y = self._check(x), self._check(y)
        rho = np.linalg.norm(x - y, axis=-1) / self.sigma
        out = self.profile(rho)
        return float(out) if out.ndim == 0 else out

    __call__ = eval

    def matrix(self, X, Y) -> np.ndarray:
        """Cross-kernel matrix with entries k(X_i, Y_j)."""
        X = np.atleast_2d(self._check(X))
        Y = np.atleast_2d(self._check(Y))
        return self.profile(cdist(X, Y) / self.sigma)

    def to_dict(self) -> dict:
        return {"family": "sobolev", "s": self.s, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, data: dict, d: int) -> "KernelSpec":
        family = data.get("family", "sobolev")
        if family != "sobolev":
            raise ValidationError(f"unsupported kernel family {family!r}")
        if "s" in data:
            return cls(d=d, s=float(data["s"]), sigma=float(data.get("sigma", 1.0)))
        return cls.matern(float(data["nu"]), d, float(data.get("sigma", 1.0)))


@dataclass(frozen=True)
class KernelConstants:
    """Constants entering the uniform-inequality bound.

    ``D_m`` already includes the ``sigma**-m`` factor; ``D_m_unit`` is the
    unit-scale value. ``M`` is taken as scale-free (see ``notes``).
    """

    M: float
    D_m: float
    C0: float
    m: int
    D_m_unit: float
    notes: tuple[str, ...] = ()


def max_order(spec: KernelSpec) -> int:
    """Largest integer m with m < s - d/2 (0 if none)."""
    nu = spec.nu
    m = math.ceil(nu) - 1
    return max(m, 0)


def c0_constant(m: int, d: int) -> float:
    """C0 = 3 * max(sqrt(d), 3 sqrt(2d) (m-1))**(2m) / m!."""
    if m < 1 or d < 1:
        raise ValidationError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    base = max(math.sqrt(d), 3.0 * math.sqrt(2.0 * d) * (m - 1))
    return 3.0 * base ** (2 * m) / math.factorial(m)


def trace_constants(spec: KernelSpec, m: int) -> KernelConstants:
    """Return (M, D_m, C0, m) for ``spec``.

    M = (2 pi)^(d/2) 2^(s + 1/2) and
    D_m = (2 pi)^(d/4) sqrt(Gamma(m + d/2) Gamma(s - d/2 - m) / (Gamma(s - d/2) Gamma(d/2))),
    evaluated in log space. Requires m < s - d/2.
    """
    d, s = spec.d, spec.s
    if int(m) != m or m < 1:
        raise PreconditionError(f"m must be a positive integer, got {m}")
    if not m < s - d / 2:
        raise PreconditionError(
            f"derivative order must satisfy m < s - d/2, got m={m} >= s - d/2 = {s - d / 2}"
        )
    log_M = (d / 2) * math.log(2 * math.pi) + (s + 0.5) * math.log(2.0)
    log_D = (d / 4) * math.log(2 * math.pi) + 0.5 * (
        math.lgamma(m + d / 2) + math.lgamma(s - d / 2 - m) - math.lgamma(s - d / 2) - math.lgamma(d / 2)
    )
    D_unit = math.exp(log_D)
    notes = ["M treated as independent of the length-scale"]
    if spec.sigma != 1.0:
        notes.append(f"D_m rescaled by sigma^-m with sigma={spec.sigma}")
    notes.append("C0 uses max(sqrt(d), 3 sqrt(2d)(m-1)) in every certificate")
    return KernelConstants(
        M=math.exp(log_M),
        D_m=D_unit / spec.sigma**m,
        C0=c0_constant(m, d),
        m=int(m),
        D_m_unit=D_unit,
        notes=tuple(notes),
    )
