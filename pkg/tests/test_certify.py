import math

import numpy as np
import pytest

from kernelsos.certify import (
    EMPIRICAL,
    PROBABILISTIC,
    certificates,
    certify_minimizer,
    certify_minimum,
    estimate_seminorm,
    h_limit,
    parabola_trace,
    residual_tau,
    uniform_bound,
)
from kernelsos.errors import ValidationError
from kernelsos.geometry import Domain, sample_halton, sample_uniform
from kernelsos.gram import GramFactor
from kernelsos.kernels import KernelSpec, trace_constants
from kernelsos.solver import SampleSet, SolverConfig, solve
from kernelsos.testfunctions import build_test_function

QUAD = build_test_function({"kind": "quadratic", "center": [0.3, -0.2], "hessian": [[1.5, 0.3], [0.3, 1.0]],
                            "domain": {"shape": "ball", "center": [0.0, 0.0], "R": 1.0}})


def solved(n=120, nu=0.0, kernel_nu=2.5, sigma=0.5, seed=0, sampler="uniform"):
    dom = QUAD.domain
    pts = sample_uniform(dom, n, seed) if sampler == "uniform" else sample_halton(dom, n)
    data = SampleSet.build(pts, QUAD(pts.points), KernelSpec.matern(kernel_nu, 2, sigma), dom)
    return solve(data, SolverConfig(lam=1e-3, eps_barrier=1e-3, nu=nu, max_iters=3000))


class TestTau:
    def test_hand_example(self):
        fac = GramFactor(np.eye(2), np.eye(2), 0.0)
        B = np.diag([0.5, 1.0])
        assert residual_tau([1.0, 2.0], 0.5, B, fac) == pytest.approx(0.5)
        fac_j = GramFactor(np.eye(2) - 0.1 * np.eye(2), np.eye(2), 0.1)
        assert residual_tau([1.0, 2.0], 0.5, B, fac_j) == pytest.approx(0.6)

    def test_naive_loop(self, rng):
        n = 9
        X = rng.uniform(size=(n, 2))
        from kernelsos.gram import cholesky_jitter, gram

        fac = cholesky_jitter(gram(KernelSpec.matern(1.5, 2), X))
        G = rng.standard_normal((n, n))
        B = G @ G.T
        vals = rng.uniform(size=n)
        ref = max(abs(vals[i] - 0.3 - fac.R[:, i] @ B @ fac.R[:, i]) for i in range(n))
        assert residual_tau(vals, 0.3, B, fac) == pytest.approx(ref, rel=1e-12)

    def test_shape_check(self):
        fac = GramFactor(np.eye(2), np.eye(2), 0.0)
        with pytest.raises(ValidationError):
            residual_tau([1.0, 2.0, 3.0], 0.0, np.eye(2), fac)


class TestUniformBound:
    def test_formula(self):
        spec = KernelSpec.matern(1.5, 2, 1.0)
        c = trace_constants(spec, 1)
        dom = Domain.cube(2)
        ub = uniform_bound(0.1, 1, 2.0, 0.5, c, dom)
        # C0 = 3 * (sqrt 2)^2 / 1! = 6
        assert c.C0 == pytest.approx(6.0)
        assert ub.epsilon == pytest.approx(6.0 * (2.0 + c.M * c.D_m * 0.5) * 0.1, rel=1e-14)
        assert ub.precondition_ok and ub.h_max == 1.0

    def test_precondition(self):
        assert h_limit(1.0, 1) == 1.0
        assert h_limit(1.0, 2) == pytest.approx(1 / 18)
        assert h_limit(2.0, 3) == pytest.approx(2 / 72)
        c = trace_constants(KernelSpec.matern(2.5, 2), 2)
        assert not uniform_bound(0.1, 2, 1.0, 1.0, c, Domain.cube(2)).precondition_ok

    def test_zero_inputs(self):
        c = trace_constants(KernelSpec.matern(1.5, 2), 1)
        assert uniform_bound(0.0, 1, 5.0, 5.0, c, Domain.cube(2)).epsilon == 0.0
        assert uniform_bound(0.3, 1, 0.0, 0.0, c, Domain.cube(2)).epsilon == 0.0

    @pytest.mark.parametrize("bad", [(-0.1, 1.0, 1.0), (0.1, -1.0, 1.0), (0.1, 1.0, -1.0)])
    def test_negative(self, bad):
        c = trace_constants(KernelSpec.matern(1.5, 2), 1)
        with pytest.raises(ValidationError):
            uniform_bound(bad[0], 1, bad[1], bad[2], c, Domain.cube(2))

    def test_order_mismatch(self):
        c = trace_constants(KernelSpec.matern(2.5, 2), 1)
        with pytest.raises(ValidationError):
            uniform_bound(0.1, 2, 1.0, 1.0, c, Domain.cube(2))


class TestCertificates:
    def test_minimum_is_sound(self):
        for seed in range(3):
            out = solved(seed=seed, kernel_nu=1.5)
            fz = float(QUAD(out.z_hat[None])[0])
            cert = certify_minimum(out, fz, 0.2, QUAD.seminorm_bound(1), 1)
            assert cert.lower_bound <= QUAD.f_star <= fz
            assert cert.gap_bound >= fz - QUAD.f_star
            assert cert.consistent

    def test_tau_reflects_solution(self):
        out = solved(kernel_nu=1.5)
        cert = certify_minimum(out, 0.0, 0.1, 1.0, 1)
        assert cert.tau == pytest.approx(np.max(np.abs(out.residuals)) + out.jitter_tau, rel=1e-6)

    def test_minimum_rejects_parabola(self):
        out = solved(nu=0.4)
        with pytest.raises(ValidationError):
            certify_minimum(out, 0.0, 0.1, 1.0, 1)

    def test_minimizer_rejects_plain(self):
        with pytest.raises(ValidationError):
            certify_minimizer(solved(), 0.0, 0.1, 1.0, 2)

    def test_parabola_trace_two_ways(self):
        out = solved(nu=0.4, n=60)
        a = parabola_trace(out, method="triangular")
        b = parabola_trace(out, method="gram")
        assert a == pytest.approx(b, rel=1e-8)

    def test_parabola_trace_single_point(self):
        X = np.array([[0.1, 0.2]])
        data = SampleSet.build(X, QUAD(X), KernelSpec.matern(2.5, 2), QUAD.domain)
        out = solve(data, SolverConfig(nu=0.5))
        assert parabola_trace(out) == 0.0

    def test_minimizer_sound(self):
        out = solved(nu=0.4, n=150)
        fz = float(QUAD(out.z_hat[None])[0])
        cert = certify_minimizer(out, fz, 0.02, QUAD.seminorm_bound(2), 2)
        assert cert.precondition_ok
        true_loc = 0.5 * 0.4 * float(np.sum((QUAD.argmin - out.z_hat) ** 2))
        assert cert.localization_bound >= true_loc
        assert cert.distance_bound >= np.linalg.norm(QUAD.argmin - out.z_hat)
        assert cert.lower_bound <= QUAD.f_star <= fz
        assert cert.C_hat == pytest.approx(parabola_trace(out))

    def test_minimizer_needs_order_two(self):
        out = solved(nu=0.4, n=60)
        cert = certify_minimizer(out, 1.0, 0.01, 1.0, 1)
        assert not cert.precondition_ok and not cert.rigorous

    def test_inconsistent_warns(self):
        out = solved(kernel_nu=1.5, n=60)
        with pytest.warns(RuntimeWarning, match="inconsistent"):
            cert = certify_minimum(out, out.c_hat - 1e6, 0.0, 0.0, 1)
        assert not cert.consistent

    def test_emission_by_sampler(self):
        out = solved(kernel_nu=1.5, n=80)
        certs = certificates(out, 0.5, 1.0, 1, probes=2000)
        assert [c.label for c in certs] == [EMPIRICAL, PROBABILISTIC]
        assert not certs[0].rigorous
        assert not certs[1].precondition_ok  # 80 points are far below the threshold
        halton = solved(kernel_nu=1.5, n=80, sampler="halton")
        assert [c.label for c in certificates(halton, 0.5, 1.0, 1, probes=2000)] == [EMPIRICAL]

    def test_to_dict(self):
        d = certify_minimum(solved(kernel_nu=1.5, n=40), 1.0, 0.1, 1.0, 1).to_dict()
        assert d["rigorous"] is False and "constants" in d and d["m"] == 1


class TestSeminormEstimate:
    def test_quadratic_second_order(self):
        est = estimate_seminorm(QUAD, QUAD.domain, 2, probes=32)
        assert est == pytest.approx(3.0, rel=1e-5)

    def test_first_order_below_analytic(self):
        est = estimate_seminorm(QUAD, QUAD.domain, 1, probes=500)
        assert 0.5 * QUAD.seminorm_bound(1) <= est <= QUAD.seminorm_bound(1) * (1 + 1e-6)

    def test_sine_third_order(self):
        f = lambda X: np.sin(X[:, 0])
        est = estimate_seminorm(f, Domain.box([0.0], [math.pi / 2]), 3, probes=2000, step=1e-2)
        assert est == pytest.approx(1.0, abs=0.01)
