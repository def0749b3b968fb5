"""Damped-Newton solver for the log-det penalized dual of the kernel SoS problem.

For samples x_1..x_n with values f_i and features Phi_i (columns of the
Cholesky factor R of the Gram matrix), the dual function on the slice
``sum(alpha) = 1`` is

    H(alpha) = alpha.f - (eps/n) log det(M) + (eps/n) log(eps/n) - eps,
    M(alpha) = R Diag(alpha) R^T + lam I,

optionally plus the parabola term (nu/2)(-sum_i alpha_i |x_i|^2 + |sum_i alpha_i x_i|^2).
With W = R^T M^-1 R the gradient is ``f - (eps/n) diag(W)`` and the Hessian
``(eps/n) W * W`` (elementwise), each from one Cholesky of M per iterate.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import LinAlgError, blas, cho_factor, cho_solve, cholesky, solve_triangular

from .errors import OutOfDomainError, SingularSystemError, ValidationError
from .geometry import Domain, PointSet
from .gram import DEFAULT_JITTERS, GramFactor, cholesky_jitter, cross_matrix, gram
from .kernels import KernelSpec

__all__ = [
    "SampleSet",
    "SolverConfig",
    "DualState",
    "NewtonStep",
    "SolveOutput",
    "dual_state",
    "dual_objective",
    "dual_gradient",
    "dual_hessian",
    "newton_step",
    "solve",
    "model_eval",
    "iteration_budget",
    "check_iteration_budget",
    "recover",
]

log = logging.getLogger(__name__)


@dataclass
class SampleSet:
    """Sample points, function values, kernel and Gram factorization."""

    X: np.ndarray
    f: np.ndarray
    spec: KernelSpec
    factor: GramFactor
    domain: Domain | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.X.shape[0]
        if self.f.shape != (n,):
            raise ValidationError(f"got {n} points but {self.f.size} values")
        if not np.all(np.isfinite(self.f)):
            raise ValidationError("function values must be finite")
        if self.factor.n != n:
            raise ValidationError("Gram factor size does not match the number of points")
        self._sq = np.einsum("ij,ij->i", self.X, self.X)
        self._Rf = np.asfortranarray(self.factor.R)

    @classmethod
    def build(cls, points, values, spec: KernelSpec, domain: Domain | None = None,
              schedule=DEFAULT_JITTERS) -> "SampleSet":
        meta = {}
        if isinstance(points, PointSet):
            meta = {"sampler": points.sampler, "seed": points.seed, "skip": points.skip}
            X = points.points
        else:
            X = np.atleast_2d(np.asarray(points, dtype=float))
        factor = cholesky_jitter(gram(spec, X), schedule)
        return cls(X, values, spec, factor, domain, meta)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def R(self) -> np.ndarray:
        return self.factor.R

    @property
    def sq_norms(self) -> np.ndarray:
        return self._sq


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings. ``kappa`` bounds the scaled decrement sqrt(n/eps) * lambda(alpha)."""

    lam: float = 1e-3
    eps_barrier: float = 1e-3
    kappa: float = 1e-6
    max_iters: int = 500
    nu: float = 0.0
    max_backtracks: int = 60

    def __post_init__(self):
        if not self.eps_barrier > 0:
            raise ValidationError(f"eps_barrier must be positive, got {self.eps_barrier}")
        if not self.lam >= 0:
            raise ValidationError(f"lambda must be nonnegative, got {self.lam}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValidationError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not self.nu >= 0:
            raise ValidationError(f"nu must be nonnegative, got {self.nu}")
        if not self.kappa > 0:
            raise ValidationError(f"kappa must be positive, got {self.kappa}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "eps_barrier": self.eps_barrier, "kappa": self.kappa,
                "max_iters": self.max_iters, "nu": self.nu, "max_backtracks": self.max_backtracks}

    @classmethod
    def from_dict(cls, data: dict) -> "SolverConfig":
        data = dict(data)
        if "lambda" in data:
            data["lam"] = data.pop("lambda")
        casts = {"lam": float, "eps_barrier": float, "kappa": float, "max_iters": int,
                 "nu": float, "max_backtracks": int}
        unknown = set(data) - set(casts)
        if unknown:
            raise ValidationError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**{k: casts[k](v) for k, v in data.items()})


@dataclass
class DualState:
    """An iterate alpha together with the lower Cholesky factor L of M(alpha)."""

    alpha: np.ndarray
    L: np.ndarray
    Y: np.ndarray  # L^-1 R
    logdet: float
    objective: float
    decrement: float = math.nan
    _W: np.ndarray | None = field(default=None, repr=False)

    def W(self) -> np.ndarray:
        """R^T M^-1 R = Y^T Y, symmetric."""
        if self._W is None:
            W = blas.dsyrk(1.0, np.asfortranarray(self.Y), trans=1, lower=0)
            self._W = np.triu(W) + np.triu(W, 1).T
        return self._W


def _form_M(alpha: np.ndarray, data: SampleSet, lam: float) -> np.ndarray:
    # R Diag(alpha) R^T with one triangular multiply
    right = np.asfortranarray((data.R * alpha).T)
    M = blas.dtrmm(1.0, data._Rf, right, side=0, lower=0)
    M[np.diag_indices_from(M)] += lam
    return M


def _parabola_value(alpha, data, nu):
    z = alpha @ data.X
    return 0.5 * nu * (-(alpha @ data.sq_norms) + z @ z)


def dual_state(alpha, data: SampleSet, cfg: SolverConfig) -> DualState:
    """Factor M(alpha) and evaluate H(alpha); raises OutOfDomainError if M is not PD."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (data.n,):
        raise ValidationError(f"alpha must have shape ({data.n},)")
    M = _form_M(alpha, data, cfg.lam)
    try:
        L = cholesky(M, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise OutOfDomainError("M(alpha) is not positive definite") from exc
    diag = np.diag(L)
    if not np.all(diag > 0):
        raise OutOfDomainError("M(alpha) is not positive definite")
    logdet = 2.0 * float(np.sum(np.log(diag)))
    Y = solve_triangular(L, data.R, lower=True, check_finite=False)
    return DualState(alpha, L, Y, logdet, _objective(alpha, logdet, data, cfg))


def _objective(alpha, logdet, data, cfg) -> float:
    n, eps = data.n, cfg.eps_barrier
    val = float(alpha @ data.f) - (eps / n) * logdet + (eps / n) * math.log(eps / n) - eps
    if cfg.nu != 0.0:
        val += _parabola_value(alpha, data, cfg.nu)
    return val


def dual_objective(state: DualState, data: SampleSet, cfg: SolverConfig) -> float:
    """H(alpha), including the constant terms."""
    return _objective(state.alpha, state.logdet, data, cfg)


def dual_gradient(state: DualState, data: SampleSet, cfg: SolverConfig) -> np.ndarray:
    """f_i - (eps/n) Phi_i^T M^-1 Phi_i, plus the parabola terms when nu > 0."""
    g = data.f - (cfg.eps_barrier / data.n) * np.diag(state.W())
    if cfg.nu != 0.0:
        z = state.alpha @ data.X
        g = g + 0.5 * cfg.nu * (-data.sq_norms + 2.0 * (data.X @ z))
    return g


def dual_hessian(state: DualState, data: SampleSet, cfg: SolverConfig) -> np.ndarray:
    """(eps/n) (Phi_i^T M^-1 Phi_j)^2, plus nu x_i.x_j when nu > 0."""
    W = state.W()
    H = (cfg.eps_barrier / data.n) * (W * W)
    if cfg.nu != 0.0:
        H = H + cfg.nu * (data.X @ data.X.T)
    return H


class NewtonStep(NamedTuple):
    direction: np.ndarray
    decrement: float  # lambda(alpha) = sqrt(D^T H'' D)
    scaled: float  # sqrt(n/eps) * lambda(alpha)
    gradient: np.ndarray
    ridge: float


_RIDGES = (0.0, 1e-12, 1e-10, 1e-8)
_PRECISION = 10.0 * np.finfo(float).eps


def _factor_hessian(H: np.ndarray):
    scale = float(np.trace(H))
    for r in _RIDGES:
        A = H + (r * scale) * np.eye(H.shape[0]) if r else H
        try:
            return cho_factor(A, lower=False, check_finite=False), r * scale, A
        except LinAlgError:
            continue
    raise SingularSystemError("Newton system is singular even after ridge regularization")


def newton_step(state: DualState, data: SampleSet, cfg: SolverConfig) -> NewtonStep:
    """Newton direction projected on the slice sum(alpha) = 1, and its decrement."""
    g = dual_gradient(state, data, cfg)
    H = dual_hessian(state, data, cfg)
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(H))):
        raise SingularSystemError("non-finite gradient or Hessian")
    fac, ridge, A = _factor_hessian(H)
    u = cho_solve(fac, g, check_finite=False)
    v = cho_solve(fac, np.ones(data.n), check_finite=False)
    delta = u - (u.sum() / v.sum()) * v
    # remove rounding drift off the slice
    delta -= delta.mean()
    dec = math.sqrt(max(float(delta @ (A @ delta)), 0.0))
    scaled = math.sqrt(data.n / cfg.eps_barrier) * dec
    return NewtonStep(delta, dec, scaled, g, ridge)


@dataclass
class SolveOutput:
    """Solution of the dual plus everything needed for models and certificates."""

    c_hat: float
    c_feas: float
    alpha: np.ndarray
    z_raw: np.ndarray
    z_hat: np.ndarray
    gradient: np.ndarray
    history: list
    iterations: int
    status: str
    decrement: float  # final scaled decrement
    backtracks: int
    regularized: int
    state: DualState
    data: SampleSet
    cfg: SolverConfig

    @property
    def jitter_tau(self) -> float:
        """Slack from the Gram jitter, eta * max_i B_ii."""
        return self.data.factor.jitter * float(np.max(np.diag(self.B_hat)))

    @property
    def converged(self) -> bool:
        """True when stopped by the decrement test or at floating-point resolution."""
        return self.status in ("converged", "precision_limit")

    @property
    def B_hat(self) -> np.ndarray:
        """(eps/n) M^-1 as a dense symmetric matrix."""
        if not hasattr(self, "_B"):
            Linv = solve_triangular(self.state.L, np.eye(self.data.n), lower=True)
            self._B = (self.cfg.eps_barrier / self.data.n) * (Linv.T @ Linv)
        return self._B

    @property
    def trace_B(self) -> float:
        return float(np.trace(self.B_hat))

    @property
    def model_at_samples(self) -> np.ndarray:
        """Phi_i^T B Phi_i for each sample."""
        return (self.cfg.eps_barrier / self.data.n) * np.diag(self.state.W())

    @property
    def adjusted_f(self) -> np.ndarray:
        """Values the SoS model fits: f, or f - (nu/2)|x|^2 + nu x.z with the parabola."""
        if self.cfg.nu == 0.0:
            return self.data.f
        nu, X = self.cfg.nu, self.data.X
        return self.data.f - 0.5 * nu * self.data.sq_norms + nu * (X @ self.z_raw)

    @property
    def residuals(self) -> np.ndarray:
        """f_i - c_hat - Phi_i^T B Phi_i (multiplier form of c)."""
        return self.adjusted_f - self.c_hat - self.model_at_samples

    @property
    def feasibility_residual(self) -> float:
        """max_i |f_i - c_feas - Phi_i^T B Phi_i|."""
        return float(np.max(np.abs(self.adjusted_f - self.c_feas - self.model_at_samples)))

    @property
    def vertex_value(self) -> float:
        """c_hat - (nu/2)|z|^2 at the projected candidate; equals c_hat when nu = 0."""
        return self.c_hat - 0.5 * self.cfg.nu * float(self.z_hat @ self.z_hat)

    def record(self) -> dict:
        return {
            "c_hat": self.c_hat,
            "c_feas": self.c_feas,
            "z_hat": self.z_hat.tolist(),
            "decrement": self.decrement,
            "iterations": self.iterations,
            "status": self.status,
            "residual_max": float(np.max(np.abs(self.residuals))),
            "backtracks": self.backtracks,
            "jitter": self.data.factor.jitter,
        }


def solve(data: SampleSet, cfg: SolverConfig = SolverConfig(), alpha0=None) -> SolveOutput:
    """Minimize the dual by damped Newton from alpha = 1/n.

    Each step is alpha - Delta / (1 + delta) with delta the scaled decrement;
    the step is halved while M leaves the PD cone or H would increase. Stops
    when the scaled decrement is at most ``kappa`` ("converged"), when the
    decrease a step can achieve is below floating-point resolution of H
    ("precision_limit"), after ``max_iters`` steps ("max_iters"), or when
    halving cannot produce a non-increasing H ("stalled").
    """
    n = data.n
    alpha = np.full(n, 1.0 / n) if alpha0 is None else np.asarray(alpha0, dtype=float).copy()
    if abs(alpha.sum() - 1.0) > 1e-10:
        raise ValidationError("initial alpha must sum to one")
    state = dual_state(alpha, data, cfg)
    if not math.isfinite(state.objective):
        raise ValidationError("non-finite dual objective at the starting point")
    history: list[tuple[float, float]] = []
    backtracks = regularized = iters = 0
    status = "max_iters"
    step = None
    while True:
        step = newton_step(state, data, cfg)
        state.decrement = step.decrement
        regularized += step.ridge > 0
        history.append((state.objective, step.decrement))
        if step.scaled <= cfg.kappa:
            status = "converged"
            break
        if step.decrement**2 <= _PRECISION * max(1.0, abs(state.objective)):
            # predicted decrease is below the rounding level of H
            status = "precision_limit"
            break
        if iters >= cfg.max_iters:
            break
        t = 1.0 / (1.0 + step.scaled)
        accepted = None
        for _ in range(cfg.max_backtracks):
            cand = state.alpha - t * step.direction
            try:
                new = dual_state(cand, data, cfg)
            except OutOfDomainError:
                new = None
            if new is not None and new.objective <= state.objective:
                accepted = new
                break
            t *= 0.5
            backtracks += 1
        if accepted is None:
            status = "stalled"
            break
        state = accepted
        iters += 1
    if status != "converged":
        log.info("dual solve ended with status %s after %d iterations (scaled decrement %.3g)",
                 status, iters, step.scaled)
    return _finalize(state, step, data, cfg, history, iters, status, backtracks, int(regularized))


def _finalize(state, step, data, cfg, history, iters, status, backtracks, regularized) -> SolveOutput:
    g = step.gradient
    z_raw = state.alpha @ data.X
    z_hat = data.domain.project(z_raw) if data.domain is not None else z_raw.copy()
    nu = cfg.nu
    adjusted = data.f if nu == 0.0 else data.f - 0.5 * nu * data.sq_norms + nu * (data.X @ z_raw)
    model = (cfg.eps_barrier / data.n) * np.diag(state.W())
    return SolveOutput(
        c_hat=float(np.mean(g)),
        c_feas=float(np.min(adjusted - model)),
        alpha=state.alpha,
        z_raw=z_raw,
        z_hat=z_hat,
        gradient=g,
        history=history,
        iterations=iters,
        status=status,
        decrement=step.scaled,
        backtracks=backtracks,
        regularized=regularized,
        state=state,
        data=data,
        cfg=cfg,
    )


def recover(data: SampleSet, cfg: SolverConfig, alpha, status: str = "restored", iterations: int = 0) -> SolveOutput:
    """Rebuild a :class:`SolveOutput` from a stored dual variable without iterating."""
    state = dual_state(np.asarray(alpha, dtype=float), data, cfg)
    step = newton_step(state, data, cfg)
    state.decrement = step.decrement
    return _finalize(state, step, data, cfg, [(state.objective, step.decrement)], iterations, status, 0,
                     int(step.ridge > 0))


def model_eval(out: SolveOutput, x, form: str = "cholesky") -> np.ndarray | float:
    """Learned nonnegative model g(x) at one point or a batch of points.

    ``form="cholesky"`` evaluates (eps/n) |L^-1 R^-T q(x)|^2, the SoS model in
    the span of the sample features. ``form="woodbury"`` evaluates
    (eps/(n lam)) (k(x,x) - q^T (K + lam Diag(alpha)^-1)^-1 q), which needs
    lam > 0 and alpha without zeros; it coincides with the first form at the
    sample points and exceeds it elsewhere by (eps/(n lam)) times the kernel
    interpolation power function.
    """
    data, cfg = out.data, out.cfg
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Y = np.atleast_2d(x)
    Q = cross_matrix(data.spec, data.X, Y)
    scale = cfg.eps_barrier / data.n
    if form == "cholesky":
        w = solve_triangular(data.R, Q, trans="T", lower=False)
        u = solve_triangular(out.state.L, w, lower=True)
        vals = scale * np.einsum("ij,ij->j", u, u)
    elif form == "woodbury":
        if cfg.lam <= 0:
            raise ValidationError("the Woodbury form needs lambda > 0")
        if np.any(out.alpha == 0):
            raise ValidationError("the Woodbury form needs alpha without zero entries")
        K = data.factor.K + data.factor.jitter * np.eye(data.n)
        A = K + cfg.lam * np.diag(1.0 / out.alpha)
        sol = np.linalg.solve(A, Q)
        vals = (scale / cfg.lam) * (1.0 - np.einsum("ij,ij->j", Q, sol))
    else:
        raise ValidationError(f"unknown model form {form!r}")
    return float(vals[0]) if single else vals


def iteration_budget(out: SolveOutput) -> float:
    """Newton-step budget with the unobservable optimal trace replaced by tr(B).

    (n/eps)(mean f - min f) + log det(K + n lam I) + (n/eps) lam tr(B) + log eps + log log(1/kappa)
    """
    data, cfg = out.data, out.cfg
    n, eps = data.n, cfg.eps_barrier
    f = data.f
    sign, logdet = np.linalg.slogdet(data.factor.K + n * cfg.lam * np.eye(n))
    if sign <= 0:
        logdet = -np.inf
    loglog = math.log(math.log(1.0 / cfg.kappa)) if cfg.kappa < 1 / math.e else 0.0
    return (n / eps) * (f.mean() - f.min()) + logdet + (n / eps) * cfg.lam * out.trace_B + math.log(eps) + loglog


def check_iteration_budget(out: SolveOutput) -> bool:
    """Soft check: warn (never raise) if the iteration count exceeds the budget."""
    budget = iteration_budget(out)
    ok = bool(out.iterations <= budget)
    if not ok:
        warnings.warn(f"{out.iterations} Newton steps exceed the budget estimate {budget:.1f}", RuntimeWarning)
    return ok
