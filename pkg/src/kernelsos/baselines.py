"""Random search and random-restart gradient descent under a fixed evaluation budget.

Gradient descent estimates gradients by forward differences, so each step
costs d + 1 evaluations (the current point plus one per coordinate).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError
from .evaluation import CountingFunction
from .geometry import Domain, sample_halton, sample_uniform

__all__ = ["BaselineResult", "random_search", "random_gd", "gd_trajectory", "tune_gd_step", "FD_REL_STEP"]

FD_REL_STEP = 1e-5  # forward-difference step as a fraction of the domain diameter


@dataclass
class BaselineResult:
    best_x: np.ndarray
    best_f: float
    trace: np.ndarray  # running minimum after each evaluation
    evals: int
    meta: dict = field(default_factory=dict)


def _running_min(values: np.ndarray) -> np.ndarray:
    return np.minimum.accumulate(values)


def random_search(f: Callable, domain: Domain, n: int, sampler: str = "uniform", seed: int = 0) -> BaselineResult:
    """Evaluate ``n`` points and keep the best.

    Halton points use the burn-in ``skip = seed * n`` so that different
    seeds give disjoint stretches of the sequence.
    """
    if n < 1:
        raise ValidationError(f"budget must be >= 1, got {n}")
    counted = CountingFunction(f, budget=n)
    if sampler == "uniform":
        pts = sample_uniform(domain, n, seed)
    elif sampler == "halton":
        pts = sample_halton(domain, n, skip=seed * n)
    else:
        raise ValidationError(f"unknown sampler {sampler!r}")
    vals = counted(pts.points)
    i = int(np.argmin(vals))
    return BaselineResult(pts.points[i].copy(), float(vals[i]), _running_min(vals), counted.count,
                          {"sampler": sampler, "seed": seed})


def gd_trajectory(f: Callable, x0, steps: int, step_size: float, domain: Domain,
                  fd_step: float | None = None):
    """Projected gradient descent with forward-difference gradients from ``x0``.

    Returns (iterates, values at iterates, all evaluated points, all values).
    Iterate t's value is the base point of its own finite-difference stencil,
    so the final iterate (after ``steps`` updates) is not evaluated.
    """
    x = np.asarray(x0, dtype=float).copy()
    d = x.size
    h = FD_REL_STEP * domain.diameter if fd_step is None else fd_step
    E = h * np.eye(d)
    iterates, fvals, pts_all, vals_all = [], [], [], []
    for _ in range(steps):
        stencil = np.vstack([x, x + E])
        v = np.asarray(f(stencil), dtype=float).reshape(d + 1)
        grad = (v[1:] - v[0]) / h
        iterates.append(x.copy())
        fvals.append(v[0])
        pts_all.append(stencil)
        vals_all.append(v)
        x = domain.project(x - step_size * grad)
    iterates.append(x.copy())
    return np.array(iterates), np.array(fvals), np.vstack(pts_all) if pts_all else np.empty((0, d)), \
        np.concatenate(vals_all) if vals_all else np.empty(0)


def random_gd(f: Callable, domain: Domain, n: int, steps: int, step_size: float, seed: int = 0,
              fd_step: float | None = None) -> BaselineResult:
    """Uniform random restarts of ``steps`` gradient steps each, within budget ``n``.

    ``n // ((d+1) steps)`` full restarts run first; leftover budget funds one
    shorter restart, so at most d evaluations go unused. Every evaluation,
    stencil points included, enters the running minimum.
    """
    d = domain.d
    per_run = (d + 1) * steps
    if steps < 1 or n < per_run:
        raise ValidationError(f"budget {n} is too small for one restart of {steps} steps in d={d}")
    counted = CountingFunction(f, budget=n)
    full = n // per_run
    leftover_steps = (n - full * per_run) // (d + 1)
    plan = [steps] * full + ([leftover_steps] if leftover_steps else [])
    starts = sample_uniform(domain, len(plan), seed).points
    all_pts, all_vals = [], []
    increases = 0
    for x0, k in zip(starts, plan):
        _, fv, pts, vals = gd_trajectory(counted, x0, k, step_size, domain, fd_step)
        increases += int(np.sum(np.diff(fv) > 0))
        all_pts.append(pts)
        all_vals.append(vals)
    pts = np.vstack(all_pts)
    vals = np.concatenate(all_vals)
    assert counted.count <= n
    i = int(np.argmin(vals))
    return BaselineResult(pts[i].copy(), float(vals[i]), _running_min(vals), counted.count,
                          {"restarts": len(plan), "steps": steps, "step_size": step_size,
                           "increases": increases, "seed": seed,
                           "fd_step": FD_REL_STEP * domain.diameter if fd_step is None else fd_step})


def tune_gd_step(f: Callable, domain: Domain, n: int, steps: int, grid: Sequence[float], seed: int = 0):
    """Pick the step size with the smallest final value among descent-preserving ones.

    Each candidate runs the full budget. A step size is rejected if any
    trajectory increases f between consecutive iterates; if all are
    rejected, the smallest step size is returned. The tuning evaluations are
    not charged to the comparison budget.
    """
    if len(grid) == 0:
        raise ValidationError("step-size grid must be nonempty")
    table = []
    for eta in sorted(grid):
        res = random_gd(f, domain, n, steps, eta, seed)
        table.append({"step_size": eta, "best_f": res.best_f, "descent": res.meta["increases"] == 0})
    valid = [row for row in table if row["descent"]]
    if not valid:
        return float(min(grid)), table
    best = min(valid, key=lambda row: row["best_f"])
    return float(best["step_size"]), table
