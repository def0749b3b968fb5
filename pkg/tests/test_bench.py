import json
import math

import numpy as np
import pytest

from kernelsos.bench import (
    CSV_COLUMNS,
    cross_validate,
    draw_points,
    read_records,
    run_experiment,
    validate_config,
    write_records,
)
from kernelsos.errors import KernelSOSError, ValidationError
from kernelsos.kernels import KernelSpec
from kernelsos.solver import SampleSet, SolverConfig, solve
from kernelsos.testfunctions import build_test_function

QUAD_SPEC = {"kind": "quadratic", "center": [0.3, -0.2], "hessian": 1.0}


def small_config(**kw):
    cfg = {
        "schema_version": 1,
        "name": "quad",
        "function": QUAD_SPEC,
        "methods": ["kernel_sos", "random_search", "random_gd"],
        "n_values": [40, 60],
        "seeds": [0, 1, 2, 3],
        "sampler": "halton",
        "kernel": {"nu": 0.5},
        "solver": {"eps_barrier": 1e-3, "max_iters": 200},
        "cv": {"lambda": [1e-3], "sigma": [0.5]},
        "gd": {"steps": 5, "step_grid": [0.05, 0.2]},
    }
    cfg.update(kw)
    return cfg


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    records, errors = run_experiment(small_config(), out)
    return out, records, errors


def test_grid_shape(experiment):
    out, records, errors = experiment
    assert not errors and len(records) == 24
    assert (out / "results.csv").exists() and (out / "error_vs_n.svg").exists()
    assert (out / "error_vs_n.svg").read_text().lstrip().startswith("<?xml")


def test_budget_matching(experiment):
    _, records, _ = experiment
    for rec in records:
        assert rec["evals"] <= rec["n"]
        if rec["method"] == "kernel_sos":
            assert rec["evals"] == rec["n"]  # n - cells samples plus one f(z) per cell
        if rec["method"] == "random_search":
            assert rec["evals"] == rec["n"]
        assert rec["gap_to_true_min"] >= -1e-12


def test_deterministic(experiment, tmp_path):
    _, first, _ = experiment
    again, _ = run_experiment(small_config(), tmp_path)
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_ms"} for r in rs]
    assert strip(first) == strip(again)


def test_csv_roundtrip(experiment):
    out, records, _ = experiment
    back = read_records(out / "results.csv")
    assert list(back[0]) == CSV_COLUMNS
    for a, b in zip(records, back):
        for k in CSV_COLUMNS:
            if isinstance(a[k], float) and math.isnan(a[k]):
                assert math.isnan(b[k])
            else:
                assert a[k] == b[k]


def test_failed_jobs_are_reported(tmp_path):
    cfg = small_config(methods=["random_search", "random_gd"], n_values=[5, 40], seeds=[0])
    records, errors = run_experiment(cfg, tmp_path)
    assert len(records) == 3 and len(errors) == 1
    assert errors[0]["method"] == "random_gd" and errors[0]["n"] == 5
    assert json.loads((tmp_path / "errors.json").read_text()) == errors


def test_single_cell_cv_matches_direct_solve():
    fn = build_test_function(QUAD_SPEC)
    cfg = SolverConfig(lam=1e-3)
    cv = cross_validate(fn, fn.domain, {"lambda": [1e-3], "sigma": [0.5]}, 50, 0, 0.5, cfg)
    pts = draw_points(fn.domain, 50, "halton", 0)
    direct = solve(SampleSet.build(pts, fn(pts.points), KernelSpec.matern(0.5, 2, 0.5), fn.domain), cfg)
    assert cv.out.c_hat == direct.c_hat
    assert np.array_equal(cv.out.z_hat, direct.z_hat)
    assert cv.evals == 51


def test_cv_counts_and_picks_best():
    fn = build_test_function(QUAD_SPEC)
    grids = {"lambda": [1e-3, 1e-2], "sigma": [0.3, 1.0]}
    cv = cross_validate(fn, fn.domain, grids, 50, 1, 0.5, {"eps_barrier": 1e-3})
    assert cv.evals == 54 and len(cv.table) == 4
    assert cv.f_at_z == min(r["f_at_z"] for r in cv.table)


def test_cv_all_cells_fail():
    fn = build_test_function(QUAD_SPEC)
    with pytest.raises(KernelSOSError, match="every cross-validation cell failed"):
        cross_validate(lambda X: fn(X) * np.nan, fn.domain, {"lambda": [1e-3, 1e-2], "sigma": [1.0]}, 20)


@pytest.mark.parametrize("patch", [
    {"schema_version": 2},
    {"methods": []},
    {"methods": ["annealing"]},
    {"solver": {"lamda": 1}},
    {"colour": "red"},
])
def test_config_validation(patch):
    with pytest.raises(ValidationError):
        validate_config(small_config(**patch))


def test_write_records_repr_floats(tmp_path):
    rec = {k: 0 for k in CSV_COLUMNS}
    rec.update(method="m", function="f", status="ok", c_hat=0.1 + 0.2)
    write_records([rec], tmp_path / "r.csv")
    assert read_records(tmp_path / "r.csv")[0]["c_hat"] == 0.1 + 0.2
