import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelsos.baselines import FD_REL_STEP, gd_trajectory, random_gd, random_search, tune_gd_step
from kernelsos.errors import ValidationError
from kernelsos.evaluation import BudgetExceededError, CountingFunction
from kernelsos.geometry import Domain, sample_halton


def sphere(X):
    return np.sum(np.atleast_2d(X) ** 2, axis=1)


class TestCounting:
    def test_counts_rows(self):
        f = CountingFunction(sphere)
        f(np.zeros((3, 2)))
        f(np.zeros(2))
        assert f.count == 4

    def test_budget_checked_before_evaluating(self):
        seen = []
        f = CountingFunction(lambda X: seen.append(len(X)) or sphere(X), budget=5)
        f(np.zeros((4, 2)))
        with pytest.raises(BudgetExceededError):
            f(np.zeros((2, 2)))
        assert seen == [4] and f.count == 4

    def test_unwraps(self):
        inner = CountingFunction(sphere)
        outer = CountingFunction(inner)
        outer(np.zeros((2, 2)))
        assert outer.count == 2 and inner.count == 0


class TestRandomSearch:
    def test_best_of_samples(self):
        dom = Domain.cube(2)
        res = random_search(sphere, dom, 50, "uniform", seed=1)
        assert res.evals == 50 and res.trace.shape == (50,)
        assert res.best_f == res.trace[-1] == pytest.approx(sphere(res.best_x)[0])
        assert np.all(np.diff(res.trace) <= 0)

    def test_halton_seeds_are_disjoint_stretches(self):
        dom = Domain.cube(2)
        res = random_search(sphere, dom, 20, "halton", seed=1)
        pts = sample_halton(dom, 40).points[20:]
        assert res.best_f == pytest.approx(sphere(pts).min())

    def test_invalid(self):
        with pytest.raises(ValidationError):
            random_search(sphere, Domain.cube(2), 0)
        with pytest.raises(ValidationError):
            random_search(sphere, Domain.cube(2), 5, sampler="sobol")


class TestGradientDescent:
    def test_contraction_recursion(self):
        # f = x^2 with step 0.1: x_{t+1} = x_t - 0.1 (2 x_t + h) ~ 0.8 x_t
        dom = Domain.cube(1)
        its, fv, pts, vals = gd_trajectory(sphere, [0.5], 10, 0.1, dom)
        ref = 0.5 * 0.8 ** np.arange(11)
        assert np.allclose(its[:, 0], ref, atol=1e-4)
        assert np.allclose(fv, ref[:10] ** 2, atol=1e-4)
        assert pts.shape == (20, 1) and vals.shape == (20,)

    def test_descends_on_quadratic(self):
        dom = Domain.cube(3)
        its, fv, _, _ = gd_trajectory(sphere, [0.9, -0.4, 0.7], 20, 0.2, dom)
        assert np.all(np.diff(fv) < 0)
        assert sphere(its[-1])[0] < 1e-6

    def test_projection_keeps_iterates_inside(self):
        dom = Domain.ball([0.0, 0.0], 1.0)
        its, _, _, _ = gd_trajectory(lambda X: -sphere(X), [0.1, 0.1], 15, 0.5, dom)
        assert np.all(dom.contains(its))

    def test_default_fd_step(self):
        dom = Domain.cube(2)
        assert random_gd(sphere, dom, 30, 5, 0.1).meta["fd_step"] == pytest.approx(FD_REL_STEP * dom.diameter)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(1, 6), st.integers(0, 400))
    def test_budget_parity(self, d, steps, extra):
        dom = Domain.cube(d)
        n = (d + 1) * steps + extra
        counted = CountingFunction(sphere)
        res = random_gd(counted, dom, n, steps, 0.05, seed=extra)
        assert res.evals <= n
        assert n - res.evals <= d
        assert res.trace.shape == (res.evals,)

    def test_budget_too_small(self):
        with pytest.raises(ValidationError):
            random_gd(sphere, Domain.cube(2), 5, 10, 0.1)

    def test_best_is_an_evaluated_point(self):
        res = random_gd(sphere, Domain.cube(2), 200, 10, 0.1, seed=3)
        assert res.best_f == pytest.approx(sphere(res.best_x)[0], abs=0)
        assert res.meta["increases"] == 0

    def test_tuning_rejects_divergent_steps(self):
        dom = Domain.cube(2)
        eta, table = tune_gd_step(sphere, dom, 90, 10, [0.05, 0.3, 1.5])
        assert eta == 0.3
        assert not table[-1]["descent"]

    def test_tuning_fallback(self):
        # every candidate overshoots on x^2, so the smallest is returned
        eta, table = tune_gd_step(sphere, Domain.cube(1), 40, 10, [3.0, 2.0])
        assert not any(r["descent"] for r in table)
        assert eta == 2.0

    def test_tuning_empty_grid(self):
        with pytest.raises(ValidationError):
            tune_gd_step(sphere, Domain.cube(2), 90, 10, [])
