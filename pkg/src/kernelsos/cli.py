"""Command-line interface: ``kernelsos {solve, localize, bench, certify}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .bench import SCHEMA_VERSION, cross_validate, draw_points, run_experiment, write_records
from .certify import certificates, estimate_seminorm
from .errors import KernelSOSError
from .geometry import Domain
from .kernels import KernelSpec, max_order
from .localizer import warm_restart
from .solver import SampleSet, SolverConfig, recover, solve
from .testfunctions import build_test_function

log = logging.getLogger("kernelsos")

FUNCTIONS = {
    "bumps": {"kind": "gaussian_bumps_2d"},
    "bumps_perturbed": {"kind": "cosine_perturbed", "base": {"kind": "gaussian_bumps_2d"}},
    "separable": {"kind": "separable_lift", "base": {"kind": "gaussian_bumps_2d"}},
    "separable_perturbed": {"kind": "cosine_perturbed", "base": {"kind": "separable_lift"}},
    "quadratic": {"kind": "quadratic"},
}


def _function_spec(name: str | None, d: int | None, cfg: dict) -> dict:
    if name is None:
        spec = dict(cfg.get("function", FUNCTIONS["bumps"]))
    elif name in FUNCTIONS:
        spec = json.loads(json.dumps(FUNCTIONS[name]))
    else:
        with open(name) as fh:
            spec = yaml.safe_load(fh)
    if d is not None:
        if spec["kind"] == "separable_lift":
            spec["d"] = d
        elif spec["kind"] == "cosine_perturbed" and spec.get("base", {}).get("kind") == "separable_lift":
            spec["base"]["d"] = d
        elif spec["kind"] == "quadratic":
            spec.setdefault("center", [0.0] * d)
    return spec


def _load_cfg(path) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if cfg.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise KernelSOSError(f"unsupported schema_version {cfg.get('schema_version')}")
    return cfg


def _solver_cfg(args, cfg: dict) -> SolverConfig:
    base = dict(cfg.get("solver", {}))
    for flag, key in (("lam", "lambda"), ("eps_barrier", "eps_barrier"), ("kappa", "kappa"),
                      ("max_iters", "max_iters"), ("nu", "nu")):
        val = getattr(args, flag, None)
        if val is not None:
            base[key] = val
    return SolverConfig.from_dict(base)


def _pick(args, cfg, name, default):
    val = getattr(args, name, None)
    return cfg.get(name, default) if val is None else val


def _save_run(out_dir: Path, out, fn_spec, f_at_z, extra: dict) -> None:
    data = out.data
    np.savez(out_dir / "run.npz", X=data.X, f=data.f, alpha=out.alpha)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "function": fn_spec,
        "kernel": {**data.spec.to_dict(), "d": data.spec.d},
        "solver": out.cfg.to_dict(),
        "domain": data.domain.to_dict(),
        "sampler": data.meta,
        "f_at_z": f_at_z,
        "status": out.status,
        "iterations": out.iterations,
        **extra,
    }
    (out_dir / "run.json").write_text(json.dumps(meta, indent=2, default=float))


def cmd_solve(args) -> int:
    cfg = _load_cfg(args.config)
    fn_spec = _function_spec(args.function, args.d, cfg)
    fn = build_test_function(fn_spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scfg = _solver_cfg(args, cfg)
    n = int(_pick(args, cfg, "n", 200))
    seed = int(_pick(args, cfg, "seed", 0))
    sampler = _pick(args, cfg, "sampler", "halton")
    kernel_nu = float(args.kernel_nu if args.kernel_nu is not None else cfg.get("kernel", {}).get("nu", 0.5))
    if args.cv or "cv" in cfg:
        grids = cfg.get("cv", {"lambda": [1e-4, 1e-3, 1e-2, 1e-1], "sigma": [0.1, 0.3, 1.0]})
        cv = cross_validate(fn, fn.domain, grids, n, seed, kernel_nu, scfg, sampler)
        out, f_at_z, evals, table = cv.out, cv.f_at_z, cv.evals, cv.table
    else:
        sigma = float(args.sigma if args.sigma is not None else cfg.get("kernel", {}).get("sigma", 1.0))
        pts = draw_points(fn.domain, n, sampler, seed)
        data = SampleSet.build(pts, fn(pts.points), KernelSpec.matern(kernel_nu, fn.d, sigma), fn.domain)
        out = solve(data, scfg)
        f_at_z = float(fn(out.z_hat[None])[0])
        evals, table = n + 1, []
    rec = {
        "method": "kernel_sos", "function": fn.kind, "n": n, "seed": seed, "lambda": out.cfg.lam,
        "sigma": out.data.spec.sigma, "nu": out.cfg.nu, "c_hat": out.c_hat, "f_at_z": f_at_z,
        "gap_to_true_min": f_at_z - fn.f_star, "cert_bound": math.nan, "iterations": out.iterations,
        "evals": evals, "status": out.status, "wall_ms": math.nan,
    }
    m = max_order(out.data.spec)
    summary = {**out.record(), "f_at_z": f_at_z, "f_star": fn.f_star, "c_feas": out.c_feas,
               "trace_B": out.trace_B, "cv_table": table}
    if m >= 1 and out.cfg.nu == 0.0:
        try:
            certs = certificates(out, f_at_z, fn.seminorm_bound(m), m, seed=seed)
            rec["cert_bound"] = certs[0].gap_bound
            summary["certificates"] = [c.to_dict() for c in certs]
        except KernelSOSError as exc:
            log.warning("certificate skipped: %s", exc)
    write_records([rec], out_dir / "results.csv")
    (out_dir / "solve.json").write_text(json.dumps(summary, indent=2, default=float))
    _save_run(out_dir, out, fn_spec, f_at_z, {"seed": seed})
    if fn.d == 2 and not args.no_plot:
        from .plotting import plot_landscape

        plot_landscape(fn, fn.domain, out.data.X, out.z_hat, out_dir / "landscape.svg", fn.argmin)
    print(f"c_hat={out.c_hat:.6g} f(z)={f_at_z:.6g} z={np.array2string(out.z_hat, precision=4)} "
          f"status={out.status} iterations={out.iterations}")
    return 0


def cmd_localize(args) -> int:
    cfg = _load_cfg(args.config)
    fn_spec = _function_spec(args.function or "quadratic", args.d, cfg)
    fn = build_test_function(fn_spec)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scfg = _solver_cfg(args, cfg)
    if scfg.nu == 0.0:
        log.warning("nu = 0: the candidate is the plain weighted average, not a parabola vertex")
    kernel_nu = float(args.kernel_nu if args.kernel_nu is not None else cfg.get("kernel", {}).get("nu", 0.5))
    sigma = float(args.sigma if args.sigma is not None else cfg.get("kernel", {}).get("sigma", 1.0))
    spec = KernelSpec.matern(kernel_nu, fn.d, sigma)
    seed = int(_pick(args, cfg, "seed", 0))
    res = warm_restart(fn, fn.domain, spec, scfg, args.stages, args.n_per_stage, seed, args.shrink)
    with open(out_dir / "stages.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stage", "center", "radius", "sigma", "c_hat", "vertex_value", "z", "step", "status"])
        for row in res.stage_log:
            w.writerow([row["stage"], " ".join(f"{v:.10g}" for v in row["center"]), row["radius"], row["sigma"],
                        row["c_hat"], row["vertex_value"], " ".join(f"{v:.10g}" for v in row["z"]),
                        row["step"], row["status"]])
    f_at_z = float(fn(res.z_hat[None])[0])
    summary = {"z_hat": res.z_hat.tolist(), "f_at_z": f_at_z, "vertex_value": res.vertex_value,
               "status": res.status, "evaluations": res.evaluations, "shrink": args.shrink,
               "distance_to_argmin": float(np.linalg.norm(res.z_hat - fn.argmin))}
    (out_dir / "localize.json").write_text(json.dumps(summary, indent=2))
    if res.solve is not None:
        _save_run(out_dir, res.solve, fn_spec, f_at_z, {"seed": seed, "stage_log": res.stage_log})
    if not args.no_plot and res.stage_log:
        from .plotting import plot_stages

        plot_stages(res.stage_log, out_dir / "stages.svg")
    print(f"z={np.array2string(res.z_hat, precision=6)} f(z)={f_at_z:.6g} status={res.status} "
          f"evaluations={res.evaluations}")
    return 0 if res.status == "ok" else 2


def cmd_bench(args) -> int:
    cfg = _load_cfg(args.config)
    if args.seed is not None:
        cfg["seeds"] = [args.seed]
    records, errors = run_experiment(cfg, args.out_dir)
    print(f"{len(records)} records written to {Path(args.out_dir) / 'results.csv'}")
    if errors:
        print(f"{len(errors)} jobs failed; see errors.json", file=sys.stderr)
        return 1
    return 0


def load_run(run_dir):
    run_dir = Path(run_dir)
    arrays = np.load(run_dir / "run.npz")
    meta = json.loads((run_dir / "run.json").read_text())
    kern = meta["kernel"]
    spec = KernelSpec(d=int(kern["d"]), s=float(kern["s"]), sigma=float(kern["sigma"]))
    data = SampleSet.build(arrays["X"], arrays["f"], spec, Domain.from_dict(meta["domain"]))
    data.meta = meta.get("sampler", {})
    out = recover(data, SolverConfig.from_dict(meta["solver"]), arrays["alpha"], meta.get("status", "restored"),
                  int(meta.get("iterations", 0)))
    return out, meta


def cmd_certify(args) -> int:
    out, meta = load_run(args.run)
    fn = build_test_function(meta["function"])
    m = args.m if args.m is not None else max_order(out.data.spec)
    if m < 1:
        print("the kernel is too rough for a certificate (need s - d/2 > 1)", file=sys.stderr)
        return 2
    heuristic = False
    if args.seminorm is not None:
        seminorm = args.seminorm
    elif args.estimate_seminorm:
        seminorm = estimate_seminorm(fn, fn.domain, m, seed=args.seed or 0)
        heuristic = True
    else:
        seminorm = fn.seminorm_bound(m)
    certs = certificates(out, float(meta["f_at_z"]), seminorm, m, args.delta, args.probes, args.seed or 0,
                         heuristic)
    payload = [c.to_dict() for c in certs]
    out_path = Path(args.out_dir) / "certificate.json"
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(payload, indent=2, default=float))
    for c in certs:
        print(f"[{c.label}] gap_bound={c.gap_bound:.6g} eps={c.epsilon:.4g} tau={c.tau:.3g} h={c.h:.4g} "
              f"precondition_ok={c.precondition_ok}")
    return 0


def _add_solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, help="trace-penalty weight")
    p.add_argument("--eps-barrier", type=float, help="barrier parameter")
    p.add_argument("--kappa", type=float, help="stopping threshold on the scaled Newton decrement")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--nu", type=float, help="parabola weight (0 = plain problem)")
    p.add_argument("--kernel-nu", type=float, help="Matern order s - d/2 (0.5, 1.5, 2.5, ...)")
    p.add_argument("--sigma", type=float, help="kernel length-scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernelsos", description="Kernel sum-of-squares global optimization")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", default="results")

    p = sub.add_parser("solve", parents=[common], help="one kernel SoS run on a test function")
    p.add_argument("--function", help=f"one of {sorted(FUNCTIONS)} or a YAML function spec")
    p.add_argument("--d", type=int, help="dimension for lifted or quadratic functions")
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--sampler", choices=["uniform", "halton"])
    p.add_argument("--cv", action="store_true", help="cross-validate (lambda, sigma)")
    p.add_argument("--no-plot", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("localize", parents=[common], help="warm-restart minimizer localization")
    p.add_argument("--function")
    p.add_argument("--d", type=int)
    p.add_argument("--stages", type=int, default=4)
    p.add_argument("--n-per-stage", type=int, default=150)
    p.add_argument("--shrink", type=float, default=1 / math.e)
    p.add_argument("--no-plot", action="store_true")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("bench", parents=[common], help="run an experiment grid from a config file")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("certify", parents=[common], help="certificate for a saved run")
    p.add_argument("--run", required=True, help="directory holding run.npz and run.json")
    p.add_argument("--m", type=int, help="derivative order (default: largest valid for the kernel)")
    p.add_argument("--seminorm", type=float, help="upper bound on the order-m derivative seminorm")
    p.add_argument("--estimate-seminorm", action="store_true", help="finite-difference guess (heuristic)")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--probes", type=int)
    p.set_defaults(func=cmd_certify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench" and not args.config:
        parser.error("bench needs --config")
    try:
        return args.func(args)
    except KernelSOSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
