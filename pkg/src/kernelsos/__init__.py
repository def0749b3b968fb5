"""Kernel sum-of-squares global optimization with a posteriori certificates."""

__version__ = "0.1.0"

from .errors import (
    KernelSOSError,
    NumericalRankError,
    OutOfDomainError,
    PreconditionError,
    SingularSystemError,
    UnsupportedDimensionError,
    UnsupportedOrderError,
    ValidationError,
)
from .geometry import (
    Domain,
    PointSet,
    fill_distance_bound,
    fill_distance_empirical,
    sample_halton,
    sample_uniform,
)
from .kernels import KernelConstants, KernelSpec, c0_constant, trace_constants
from .gram import GramFactor, cholesky_jitter, cross_vector, gram
from .solver import (
    SampleSet,
    SolveOutput,
    SolverConfig,
    dual_gradient,
    dual_hessian,
    dual_objective,
    dual_state,
    model_eval,
    newton_step,
    solve,
)
from .localizer import LocalizeOutput, solve_parabola, warm_restart
from .certify import Certificate, certify_minimizer, certify_minimum, residual_tau, uniform_bound
from .baselines import random_gd, random_search
from .testfunctions import TestFunction, build_test_function
from .bench import cross_validate, run_experiment
