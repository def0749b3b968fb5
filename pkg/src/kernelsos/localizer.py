"""Minimizer localization with a parabola lower model and warm restarts.

With weight ``nu > 0`` the SoS model certifies ``f(x) >= c - (nu/2)|z|^2 +
(nu/2)|x - z|^2``; the dual optimum gives the vertex ``z = sum_i alpha_i x_i``.
Warm restarts re-solve on balls shrinking around the current vertex.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import KernelSOSError, ValidationError
from .evaluation import BudgetExceededError, CountingFunction
from .geometry import Domain, sample_uniform
from .kernels import KernelSpec
from .solver import SampleSet, SolveOutput, SolverConfig, solve

__all__ = ["LocalizeOutput", "solve_parabola", "warm_restart", "estimate_beta", "CountingFunction",
           "stage_size_estimate"]

log = logging.getLogger(__name__)


@dataclass
class LocalizeOutput:
    c_hat: float
    z_hat: np.ndarray
    vertex_value: float
    solve: SolveOutput | None
    stage_log: list = field(default_factory=list)
    status: str = "ok"
    evaluations: int = 0

    @property
    def B_hat(self) -> np.ndarray:
        return self.solve.B_hat

    @property
    def nu(self) -> float:
        return self.solve.cfg.nu


def solve_parabola(data: SampleSet, cfg: SolverConfig) -> LocalizeOutput:
    """Solve the parabola variant; ``cfg.nu = 0`` gives exactly :func:`solve`."""
    if cfg.nu < 0:
        raise ValidationError("nu must be nonnegative")
    out = solve(data, cfg)
    return LocalizeOutput(out.c_hat, out.z_hat, out.vertex_value, out, status=out.status)


def warm_restart(
    f: Callable[[np.ndarray], np.ndarray],
    domain: Domain,
    spec: KernelSpec,
    cfg: SolverConfig,
    stages: int,
    n_per_stage: int,
    seed: int = 0,
    shrink: float = 1 / math.e,
    center=None,
    radius: float | None = None,
    scale_sigma: bool = True,
) -> LocalizeOutput:
    """Run ``stages`` parabola solves on shrinking balls.

    Stage t draws ``n_per_stage`` uniform points in B(z_{t-1}, r_{t-1})
    intersected with ``domain`` (seed ``seed + t``), solves, recenters at
    the new vertex and sets r_t = shrink * r_{t-1}. The kernel length-scale
    follows the radius when ``scale_sigma`` so the problem looks the same at
    every stage. If a stage fails, the last successful stage is returned with
    status "stage_failed".
    """
    if stages < 1 or n_per_stage < 1:
        raise ValidationError("need at least one stage and one point per stage")
    if not 0 < shrink < 1:
        raise ValidationError(f"shrink factor must lie in (0, 1), got {shrink}")
    counted = f if isinstance(f, CountingFunction) else CountingFunction(f)
    start = counted.count
    z = np.array(domain.center if center is None else center, dtype=float)
    r = float(domain.R if radius is None else radius)
    r0 = r
    result = None
    status = "ok"
    stage_log = []
    for t in range(1, stages + 1):
        ball = Domain.ball(z, r)
        stage_spec = replace(spec, sigma=spec.sigma * r / r0) if scale_sigma else spec
        try:
            pts = sample_uniform(ball, n_per_stage, seed + t, within=domain)
            vals = counted(pts.points)
            data = SampleSet.build(pts, vals, stage_spec, domain)
            res = solve_parabola(data, cfg)
        except BudgetExceededError:
            raise
        except (KernelSOSError, np.linalg.LinAlgError) as exc:
            warnings.warn(f"warm-restart stage {t} failed: {exc}", RuntimeWarning)
            status = "stage_failed"
            break
        stage_log.append({
            "stage": t,
            "center": z.tolist(),
            "radius": r,
            "sigma": stage_spec.sigma,
            "c_hat": res.c_hat,
            "vertex_value": res.vertex_value,
            "z": res.z_hat.tolist(),
            "step": float(np.linalg.norm(res.z_hat - z)),
            "status": res.status,
        })
        log.info("stage %d radius %.4g vertex %.6g", t, r, res.vertex_value)
        result = res
        z = res.z_hat
        r *= shrink
    if result is None:
        return LocalizeOutput(math.nan, z, math.nan, None, stage_log, "stage_failed",
                              counted.count - start)
    result.stage_log = stage_log
    result.status = status
    result.evaluations = counted.count - start
    return result


def estimate_beta(f: Callable[[np.ndarray], np.ndarray], x0, step: float = 1e-3) -> float:
    """Smallest eigenvalue of a central-difference Hessian of ``f`` at ``x0``.

    A heuristic for the curvature constant that bounds a safe parabola
    weight (take nu below it); it is not a certified lower bound.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    E = np.eye(d) * step
    pts = []
    for i in range(d):
        for j in range(d):
            pts += [x0 + E[i] + E[j], x0 + E[i] - E[j], x0 - E[i] + E[j], x0 - E[i] - E[j]]
    v = np.asarray(f(np.array(pts)), dtype=float).reshape(d, d, 4)
    H = (v[..., 0] - v[..., 1] - v[..., 2] + v[..., 3]) / (4 * step**2)
    H = 0.5 * (H + H.T)
    return float(np.linalg.eigvalsh(H)[0])


def stage_size_estimate(d: int, m: int, nu: float, R: float, eps: float, F: float, C: float = 1.0) -> float:
    """Order-of-magnitude per-stage sample size C^(d/m) (F/nu)^(d/m) R^d log(1/eps).

    ``F`` must include a user guess for the optimal trace; ``C`` is the
    unknown constant, 1 by default. Only meant for printing, never used to
    size runs.
    """
    if nu <= 0 or eps <= 0 or eps >= 1:
        raise ValidationError("need nu > 0 and 0 < eps < 1")
    return C ** (d / m) * (F / nu) ** (d / m) * R**d * math.log(1 / eps)
