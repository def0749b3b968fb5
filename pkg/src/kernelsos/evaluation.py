"""Evaluation counting for black-box objectives."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ValidationError

__all__ = ["CountingFunction", "BudgetExceededError"]


class BudgetExceededError(ValidationError):
    """More function evaluations were requested than the budget allows."""


class CountingFunction:
    """Wrap a batch evaluator ``f(X) -> values`` and count evaluations.

    With ``budget`` set, a call that would exceed it raises
    :class:`BudgetExceededError` before evaluating anything.
    """

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], budget: int | None = None):
        self.f = f.f if isinstance(f, CountingFunction) else f
        self.count = 0
        self.budget = budget

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.budget is not None and self.count + X.shape[0] > self.budget:
            raise BudgetExceededError(
                f"evaluation budget {self.budget} exceeded ({self.count} used, {X.shape[0]} requested)"
            )
        self.count += X.shape[0]
        return np.asarray(self.f(X), dtype=float).reshape(X.shape[0])
