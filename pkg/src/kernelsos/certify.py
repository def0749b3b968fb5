"""A posteriori certificates for the minimum value and the minimizer.

Given a solved instance (c, B) whose equality constraints hold up to a
slack tau at the samples, the model f - c is bounded below on the whole
domain by -(eps + 2 tau) with

    eps = C0 (|f|_m + M D_m tr(B)) h^m,

where h is the fill distance and |f|_m the order-m derivative seminorm.
The seminorm of a black-box function is unknowable; it is an input here,
and :func:`estimate_seminorm` only offers a finite-difference guess whose
certificates are labeled heuristic.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import comb

from .errors import ValidationError
from .geometry import Domain, fill_distance_bound, fill_distance_empirical
from .gram import GramFactor
from .kernels import KernelConstants, trace_constants
from .solver import SolveOutput

__all__ = [
    "Certificate",
    "UniformBound",
    "residual_tau",
    "uniform_bound",
    "h_limit",
    "certify_minimum",
    "certify_minimizer",
    "parabola_trace",
    "estimate_seminorm",
    "certificates",
]

EMPIRICAL = "empirical-h (optimistic)"
PROBABILISTIC = "probabilistic (delta-valid)"


def _feature_quadratic(B: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Phi_i^T B Phi_i for every column Phi_i of R."""
    return np.einsum("ij,ij->j", R, B @ R)


def residual_tau(values, c: float, B, factor: GramFactor) -> float:
    """max_i |values_i - c - Phi_i^T B Phi_i| + jitter * max_i B_ii.

    The jitter term accounts for R^T R = K + jitter I: the exact-kernel
    features differ from Phi_i by that ridge, which moves each constraint by
    at most jitter * B_ii.
    """
    values = np.asarray(values, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.shape != (factor.n, factor.n) or values.shape != (factor.n,):
        raise ValidationError("values, B and the Gram factor must have matching sizes")
    r = values - c - _feature_quadratic(B, factor.R)
    return float(np.max(np.abs(r))) + factor.jitter * float(np.max(np.abs(np.diag(B))))


def h_limit(r: float, m: int) -> float:
    """Largest fill distance allowed by the uniform bound, r * min(1, 1/(18 (m-1)^2))."""
    if m <= 1:
        return r
    return r * min(1.0, 1.0 / (18.0 * (m - 1) ** 2))


class UniformBound(NamedTuple):
    epsilon: float
    precondition_ok: bool
    h_max: float


def uniform_bound(h: float, m: int, seminorm: float, traceB: float,
                  consts: KernelConstants, domain: Domain) -> UniformBound:
    """eps = C0 (seminorm + M D_m traceB) h^m, with the fill-distance precondition flag."""
    for name, v in (("h", h), ("seminorm", seminorm), ("traceB", traceB)):
        if not v >= 0:
            raise ValidationError(f"{name} must be nonnegative, got {v}")
    if m != consts.m:
        raise ValidationError(f"order m={m} does not match the constants (m={consts.m})")
    eps = consts.C0 * (seminorm + consts.M * consts.D_m * traceB) * h**m
    hmax = h_limit(domain.r, m)
    return UniformBound(float(eps), bool(h <= hmax), hmax)


@dataclass
class Certificate:
    epsilon: float
    tau: float
    h: float
    m: int
    seminorm_bound: float
    gap_bound: float
    precondition_ok: bool
    lower_bound: float
    f_at_z: float
    c_hat: float
    trace_B: float
    label: str = EMPIRICAL
    heuristic_seminorm: bool = False
    consistent: bool = True
    localization_bound: float | None = None
    distance_bound: float | None = None
    C_hat: float | None = None
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def rigorous(self) -> bool:
        """True only if the precondition holds, the seminorm was supplied, and h is a valid bound."""
        return (self.precondition_ok and not self.heuristic_seminorm and self.consistent
                and self.label == PROBABILISTIC)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rigorous"] = self.rigorous
        return out


def _constants_dict(consts: KernelConstants) -> dict:
    return {"M": consts.M, "D_m": consts.D_m, "C0": consts.C0, "m": consts.m, "notes": list(consts.notes)}


def certify_minimum(out: SolveOutput, f_at_z: float, h: float, seminorm: float, m: int,
                    label: str = EMPIRICAL, heuristic_seminorm: bool = False) -> Certificate:
    """|f(z) - f_*| <= f(z) - c + eps + 2 tau for the plain (nu = 0) problem.

    The lower bound c - eps - 2 tau on f_* is the certified part; f(z) is one
    extra evaluation at the candidate.
    """
    if out.cfg.nu != 0.0:
        raise ValidationError("certify_minimum needs a nu = 0 solve; use certify_minimizer")
    data = out.data
    consts = trace_constants(data.spec, m)
    B = out.B_hat
    tau = residual_tau(data.f, out.c_hat, B, data.factor)
    trB = float(np.trace(B))
    domain = data.domain
    if domain is None:
        raise ValidationError("the sample set must carry its domain to check the precondition")
    ub = uniform_bound(h, m, seminorm, trB, consts, domain)
    lower = out.c_hat - ub.epsilon - 2 * tau
    gap = f_at_z - out.c_hat + ub.epsilon + 2 * tau
    notes = []
    consistent = f_at_z >= lower
    if not consistent:
        msg = f"f(z)={f_at_z:.6g} is below the certified lower bound {lower:.6g}; inputs are inconsistent"
        warnings.warn(msg, RuntimeWarning)
        notes.append(msg)
    if not ub.precondition_ok:
        notes.append(f"h={h:.4g} exceeds the admissible {ub.h_max:.4g}; bound is not rigorous")
    return Certificate(ub.epsilon, tau, h, m, seminorm, gap, ub.precondition_ok, lower, float(f_at_z),
                       out.c_hat, trB, label, heuristic_seminorm, consistent,
                       constants=_constants_dict(consts), notes=notes)


def parabola_trace(out: SolveOutput, z=None, method: str = "triangular") -> float:
    """(nu/2) |R^-T (X - 1 z^T)|_F^2, computed by a triangular solve or from the Gram side."""
    data = out.data
    z = out.z_hat if z is None else np.asarray(z, dtype=float)
    V = data.X - z[None, :]
    if method == "triangular":
        U = solve_triangular(data.R, V, trans="T", lower=False)
        val = float(np.sum(U * U))
    elif method == "gram":
        K = data.factor.K + data.factor.jitter * np.eye(data.n)
        val = float(np.trace(V.T @ np.linalg.solve(K, V)))
    else:
        raise ValidationError(f"unknown method {method!r}")
    return 0.5 * out.cfg.nu * val


def certify_minimizer(out, f_at_z: float, h: float, seminorm: float, m: int,
                      label: str = EMPIRICAL, heuristic_seminorm: bool = False) -> Certificate:
    """Value and localization bounds for a parabola (nu > 0) solve.

    With f_hat = c - (nu/2)|z|^2 and tau the slack of the parabola-adjusted
    constraints:

    * |f(z) - f_*| <= f(z) - f_hat + 2 tau + C1 h^m,
      C1 = C0 (|f|_m + M D_m (tr B + C_hat));
    * (nu/2)|zeta - z|^2 <= f(z) - f_hat + 2 tau + C2 h^m,
      C2 = C0 (|f|_m + nu + M D_m tr B).

    Needs m >= 2 for rigor (the precondition flag is false otherwise).
    """
    sol = out if isinstance(out, SolveOutput) else out.solve
    nu = sol.cfg.nu
    if nu <= 0:
        raise ValidationError("certify_minimizer needs nu > 0; use certify_minimum")
    data = sol.data
    if data.domain is None:
        raise ValidationError("the sample set must carry its domain to check the precondition")
    consts = trace_constants(data.spec, m)
    z = sol.z_hat
    adjusted = data.f - 0.5 * nu * data.sq_norms + nu * (data.X @ z)
    B = sol.B_hat
    tau = residual_tau(adjusted, sol.c_hat, B, data.factor)
    trB = float(np.trace(B))
    f_hat = sol.c_hat - 0.5 * nu * float(z @ z)
    C_hat = parabola_trace(sol, z)
    MD = consts.M * consts.D_m
    C1 = consts.C0 * (seminorm + MD * (trB + C_hat))
    C2 = consts.C0 * (seminorm + nu + MD * trB)
    hm = h**m
    base = f_at_z - f_hat + 2 * tau
    gap = base + C1 * hm
    loc = base + C2 * hm
    precondition = m >= 2 and h <= h_limit(data.domain.r, m)
    notes = []
    if m < 2:
        notes.append("minimizer certificate requires m >= 2; bound is not rigorous")
    elif not precondition:
        notes.append(f"h={h:.4g} exceeds the admissible {h_limit(data.domain.r, m):.4g}; bound is not rigorous")
    lower = f_hat - C1 * hm - 2 * tau
    consistent = f_at_z >= lower
    if not consistent:
        msg = f"f(z)={f_at_z:.6g} is below the certified lower bound {lower:.6g}; inputs are inconsistent"
        warnings.warn(msg, RuntimeWarning)
        notes.append(msg)
    return Certificate(C1 * hm, tau, h, m, seminorm, gap, precondition, lower, float(f_at_z), sol.c_hat,
                       trB, label, heuristic_seminorm, consistent,
                       localization_bound=loc, distance_bound=math.sqrt(max(2 * loc / nu, 0.0)),
                       C_hat=C_hat, constants=_constants_dict(consts), notes=notes)


def _multi_indices(d: int, m: int):
    for combo in itertools.combinations_with_replacement(range(d), m):
        alpha = np.zeros(d, dtype=int)
        for i in combo:
            alpha[i] += 1
        yield alpha


def _stencil(alpha: np.ndarray, step: float):
    """Offsets and weights of the tensor-product central difference for d^alpha."""
    axes = []
    for k in alpha:
        if k == 0:
            axes.append([(0.0, 1.0)])
        else:
            axes.append([((k / 2 - j) * step, (-1) ** j * comb(k, j, exact=True) / step**k)
                         for j in range(k + 1)])
    offsets, weights = [], []
    for combo in itertools.product(*axes):
        offsets.append([o for o, _ in combo])
        weights.append(math.prod(w for _, w in combo))
    return np.array(offsets), np.array(weights)


def estimate_seminorm(f: Callable[[np.ndarray], np.ndarray], domain: Domain, m: int,
                      probes: int = 256, step: float | None = None, seed: int = 0,
                      safety: float = 1.0) -> float:
    """Finite-difference guess of max_{|a|=m} sup |d^a f| over random probes.

    Heuristic only: it underestimates the supremum between probes and is
    subject to truncation error. ``safety`` multiplies the estimate.
    """
    from .geometry import sample_uniform

    if m < 1:
        raise ValidationError("m must be >= 1")
    step = (1e-3 * domain.diameter * m) if step is None else step
    P = sample_uniform(domain, probes, seed).points
    best = 0.0
    for alpha in _multi_indices(domain.d, m):
        off, w = _stencil(alpha, step)
        pts = (P[:, None, :] + off[None, :, :]).reshape(-1, domain.d)
        vals = np.asarray(f(pts), dtype=float).reshape(probes, len(w))
        best = max(best, float(np.max(np.abs(vals @ w))))
    return safety * best


def certificates(out: SolveOutput, f_at_z: float, seminorm: float, m: int, delta: float = 0.05,
                 probes: int | None = None, seed: int = 0, heuristic_seminorm: bool = False) -> list[Certificate]:
    """Emit the empirical-h certificate and, for uniform samples, the probabilistic one."""
    data = out.data
    domain = data.domain
    if domain is None:
        raise ValidationError("the sample set must carry its domain")
    fn = certify_minimum if out.cfg.nu == 0.0 else certify_minimizer
    h_emp = fill_distance_empirical(data.X, domain, probes, seed)
    certs = [fn(out, f_at_z, h_emp, seminorm, m, EMPIRICAL, heuristic_seminorm)]
    if data.meta.get("sampler", "uniform") == "uniform":
        fb = fill_distance_bound(data.n, domain, delta)
        c = fn(out, f_at_z, fb.value, seminorm, m, PROBABILISTIC, heuristic_seminorm)
        if not fb.threshold_ok:
            c.precondition_ok = False
            c.notes.append(f"n={data.n} is below the sample-size threshold {fb.threshold:.4g} of the fill-distance bound")
        c.notes.append(f"valid with probability at least {1 - delta}")
        certs.append(c)
    return certs
