import numpy as np
import pytest

from kernelsos.geometry import Domain, sample_uniform
from kernelsos.kernels import KernelSpec
from kernelsos.solver import SampleSet, SolverConfig


def make_instance(n=10, d=2, seed=0, nu_kernel=1.5, sigma=0.7, lam=1e-3, eps=1e-3, nu=0.0, f=None):
    """Small random solver instance on [-1, 1]^d."""
    dom = Domain.cube(d)
    pts = sample_uniform(dom, n, seed)
    rng = np.random.default_rng(seed + 1000)
    vals = rng.uniform(0, 1, n) if f is None else f(pts.points)
    data = SampleSet.build(pts, vals, KernelSpec.matern(nu_kernel, d, sigma), dom)
    return data, SolverConfig(lam=lam, eps_barrier=eps, nu=nu)


def random_feasible_alpha(n, rng, spread=0.5):
    """Positive weights summing to one."""
    a = np.exp(spread * rng.standard_normal(n))
    return a / a.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    test_acceptance = sys.modules.get("test_acceptance")
    if test_acceptance is not None and test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[key])
