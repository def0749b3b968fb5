"""Cross-validation, single runs and budget-matched experiment grids.

Every method is charged for each function evaluation it makes. The kernel
method spends ``n - cells`` evaluations on samples and one per
cross-validation cell on the candidate ``f(z)``, so all methods in a
comparison use the same budget ``n``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from .baselines import random_gd, random_search, tune_gd_step
from .certify import certificates
from .errors import KernelSOSError, ValidationError
from .evaluation import CountingFunction
from .geometry import Domain, PointSet, sample_halton, sample_uniform
from .kernels import KernelSpec, max_order
from .solver import SampleSet, SolveOutput, SolverConfig, solve
from .testfunctions import TestFunction, build_test_function

__all__ = [
    "CVResult",
    "cross_validate",
    "draw_points",
    "kernel_run",
    "run_experiment",
    "load_config",
    "validate_config",
    "write_records",
    "read_records",
    "CSV_COLUMNS",
    "SCHEMA_VERSION",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
CSV_COLUMNS = [
    "method", "function", "n", "seed", "lambda", "sigma", "nu", "c_hat", "f_at_z",
    "gap_to_true_min", "cert_bound", "iterations", "evals", "status", "wall_ms",
]
_INT_COLUMNS = {"n", "seed", "iterations", "evals"}
_STR_COLUMNS = {"method", "function", "status"}


def draw_points(domain: Domain, n: int, sampler: str, seed: int) -> PointSet:
    """Uniform draws with ``seed``, or Halton points with burn-in ``seed * n``."""
    if sampler == "uniform":
        return sample_uniform(domain, n, seed)
    if sampler == "halton":
        return sample_halton(domain, n, skip=seed * n)
    raise ValidationError(f"unknown sampler {sampler!r}")


@dataclass
class CVResult:
    lam: float
    sigma: float
    f_at_z: float
    out: SolveOutput
    table: list
    evals: int
    points: PointSet
    values: np.ndarray = field(repr=False, default=None)


def cross_validate(
    f: Callable,
    domain: Domain,
    grids: dict,
    n: int,
    seed: int = 0,
    kernel_nu: float = 0.5,
    solver: dict | SolverConfig | None = None,
    sampler: str = "halton",
    workers: int = 1,
) -> CVResult:
    """Solve once per (lambda, sigma) cell on one shared sample set and keep
    the cell whose candidate has the smallest f(z).

    ``n`` is the number of sample points; each cell adds one evaluation.
    Ties go to the larger lambda.
    """
    lams = list(grids.get("lambda", []))
    sigmas = list(grids.get("sigma", []))
    if not lams or not sigmas:
        raise ValidationError("cross-validation grids must be nonempty")
    base = solver if isinstance(solver, SolverConfig) else SolverConfig.from_dict(solver or {})
    counted = CountingFunction(f)
    pts = draw_points(domain, n, sampler, seed)
    vals = counted(pts.points)
    cells = [(lam, sig) for sig in sigmas for lam in lams]

    def run(cell):
        lam, sig = cell
        spec = KernelSpec.matern(kernel_nu, domain.d, sig)
        cfg = replace(base, lam=float(lam))
        try:
            data = SampleSet.build(pts, vals, spec, domain)
            return cell, solve(data, cfg), None
        except (KernelSOSError, np.linalg.LinAlgError) as exc:
            return cell, None, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]
    table, best = [], None
    for (lam, sig), out, err in results:
        row = {"lambda": lam, "sigma": sig}
        if out is None:
            row.update(f_at_z=math.nan, c_hat=math.nan, iterations=0, status="error", error=err)
        else:
            fz = float(counted(out.z_hat[None])[0])
            row.update(f_at_z=fz, c_hat=out.c_hat, iterations=out.iterations, status=out.status, error="")
            key = (fz, -lam)
            if best is None or key < best[0]:
                best = (key, lam, sig, out, fz)
        table.append(row)
    if best is None:
        report = "; ".join(f"(lambda={r['lambda']}, sigma={r['sigma']}): {r['error']}" for r in table)
        raise KernelSOSError(f"every cross-validation cell failed: {report}")
    _, lam, sig, out, fz = best
    return CVResult(lam, sig, fz, out, table, counted.count, pts, vals)


def kernel_run(fn: TestFunction, n_budget: int, seed: int, cfg: dict) -> dict:
    """Budget-matched kernel SoS run with cross-validation; returns a CSV record."""
    grids = cfg.get("cv", {"lambda": [1e-3], "sigma": [1.0]})
    cells = len(grids["lambda"]) * len(grids["sigma"])
    n_samples = n_budget - cells if cfg.get("budget_matched", True) else n_budget
    if n_samples < 2:
        raise ValidationError(f"budget {n_budget} leaves no samples after {cells} cross-validation cells")
    kernel = cfg.get("kernel", {})
    kernel_nu = float(kernel.get("nu", 0.5)) if "s" not in kernel else float(kernel["s"]) - fn.d / 2
    t0 = time.perf_counter()
    cv = cross_validate(fn, fn.domain, grids, n_samples, seed, kernel_nu, cfg.get("solver", {}),
                        cfg.get("sampler", "halton"), int(cfg.get("cv_workers", 1)))
    wall = 1000 * (time.perf_counter() - t0)
    out = cv.out
    cert = math.nan
    cert_cfg = cfg.get("certify")
    if cert_cfg:
        m = int(cert_cfg.get("m", max_order(out.data.spec)))
        if m >= 1:
            try:
                certs = certificates(out, cv.f_at_z, fn.seminorm_bound(m), m, float(cert_cfg.get("delta", 0.05)))
                cert = certs[0].gap_bound
            except (KernelSOSError, ValueError) as exc:
                log.warning("certificate failed: %s", exc)
    return {
        "method": "kernel_sos", "n": n_budget, "seed": seed, "lambda": cv.lam, "sigma": cv.sigma,
        "nu": out.cfg.nu, "c_hat": out.c_hat, "f_at_z": cv.f_at_z, "gap_to_true_min": cv.f_at_z - fn.f_star,
        "cert_bound": cert, "iterations": out.iterations, "evals": cv.evals, "status": out.status,
        "wall_ms": wall,
    }


def _baseline_record(method, fn, n, seed, res, wall, step_size=math.nan):
    return {
        "method": method, "n": n, "seed": seed, "lambda": step_size, "sigma": math.nan, "nu": math.nan,
        "c_hat": math.nan, "f_at_z": res.best_f, "gap_to_true_min": res.best_f - fn.f_star,
        "cert_bound": math.nan, "iterations": res.meta.get("restarts", 0), "evals": res.evals,
        "status": "ok", "wall_ms": wall,
    }


def _run_job(job, fn: TestFunction, cfg: dict) -> dict:
    method, n, seed = job
    t0 = time.perf_counter()
    if method == "kernel_sos":
        rec = kernel_run(fn, n, seed, cfg)
    elif method == "random_search":
        res = random_search(fn, fn.domain, n, cfg.get("sampler", "halton"), seed)
        rec = _baseline_record(method, fn, n, seed, res, 1000 * (time.perf_counter() - t0))
    elif method == "random_gd":
        gd = cfg.get("gd", {})
        steps = int(gd.get("steps", 10))
        grid = gd.get("step_grid", list(np.logspace(-4, 0, 9)))
        eta, _ = tune_gd_step(fn, fn.domain, n, steps, grid, seed)
        t0 = time.perf_counter()
        res = random_gd(fn, fn.domain, n, steps, eta, seed)
        rec = _baseline_record(method, fn, n, seed, res, 1000 * (time.perf_counter() - t0), eta)
    else:
        raise ValidationError(f"unknown method {method!r}")
    rec["function"] = cfg.get("name", fn.kind)
    return rec


_TOP_KEYS = {"schema_version", "name", "function", "methods", "n_values", "seeds", "sampler", "kernel",
             "solver", "cv", "gd", "certify", "budget_matched", "plots", "workers", "cv_workers", "out_dir"}


def validate_config(cfg: dict) -> dict:
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a mapping")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"config schema_version must be {SCHEMA_VERSION}, got {cfg.get('schema_version')!r}")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for key in ("methods", "n_values", "seeds"):
        if not cfg.get(key):
            raise ValidationError(f"config needs a nonempty {key!r} list")
    bad = set(cfg["methods"]) - {"kernel_sos", "random_search", "random_gd"}
    if bad:
        raise ValidationError(f"unknown methods: {sorted(bad)}")
    SolverConfig.from_dict(cfg.get("solver", {}))
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        return validate_config(yaml.safe_load(fh))


def write_records(records: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for rec in records:
            w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in rec.items()})


def read_records(path) -> list[dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for k, v in row.items():
                if k in _STR_COLUMNS:
                    rec[k] = v
                elif k in _INT_COLUMNS:
                    rec[k] = int(v)
                else:
                    rec[k] = float(v)
            out.append(rec)
    return out


def run_experiment(config, out_dir=None) -> tuple[list[dict], list[dict]]:
    """Run methods x n_values x seeds from a config mapping or YAML path.

    Writes ``results.csv`` (and ``errors.json`` if any job failed, plus SVG
    plots when ``plots`` is true) into ``out_dir``. Returns (records, errors).
    """
    cfg = load_config(config) if isinstance(config, (str, Path)) else validate_config(dict(config))
    out_dir = Path(out_dir or cfg.get("out_dir", "results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    fn = build_test_function(cfg.get("function"))
    jobs = [(m, int(n), int(s)) for m in cfg["methods"] for n in cfg["n_values"] for s in cfg["seeds"]]

    def safe(job):
        try:
            return _run_job(job, fn, cfg), None
        except Exception as exc:  # reported in the manifest, the grid continues
            log.exception("job %s failed", job)
            return None, {"method": job[0], "n": job[1], "seed": job[2], "error": f"{type(exc).__name__}: {exc}"}

    workers = int(cfg.get("workers", 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(safe, jobs))
    else:
        results = [safe(j) for j in jobs]
    # single writer, deterministic job order
    records = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    write_records(records, out_dir / "results.csv")
    if errors:
        (out_dir / "errors.json").write_text(json.dumps(errors, indent=2))
    if cfg.get("plots", True) and records:
        from .plotting import plot_error_vs_n

        plot_error_vs_n(records, out_dir / "error_vs_n.svg", title=cfg.get("name", fn.kind))
    return records, errors
