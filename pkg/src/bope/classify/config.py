"""Model family configurations and the sample-size sizing rules."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from ..errors import BopeError


@dataclass(frozen=True)
class LinearConfig:
    """Linear family: logistic regression for classification, ridge for regression.

    ``l2`` penalizes the slope coefficients only (never the intercept).
    """

    l2: float = 1e-4
    max_iters: int = 100
    tol: float = 1e-8

    def __post_init__(self):
        if self.l2 < 0:
            raise BopeError("l2 must be >= 0")
        if self.max_iters < 1:
            raise BopeError("max_iters must be >= 1")
        if not self.tol > 0:
            raise BopeError("tol must be > 0")


@dataclass(frozen=True)
class GBTConfig:
    """Gradient boosted trees with Newton leaf weights.

    Defaults follow the common XGBoost defaults (depth 6, shrinkage 0.3,
    l2 = 1, min child hessian 1).
    """

    rounds: int = 100
    depth: int = 6
    learning_rate: float = 0.3
    min_leaf: int = 1
    l2: float = 1.0
    min_child_weight: float = 1.0

    def __post_init__(self):
        if self.rounds < 1:
            raise BopeError("rounds must be >= 1")
        if not 1 <= self.depth <= 30:
            raise BopeError("depth must be in [1, 30]")
        if not 0 < self.learning_rate <= 1:
            raise BopeError("learning_rate must be in (0, 1]")
        if self.min_leaf < 1:
            raise BopeError("min_leaf must be >= 1")
        if self.l2 < 0 or self.min_child_weight < 0:
            raise BopeError("l2 and min_child_weight must be >= 0")
        if self.l2 == 0 and self.min_child_weight == 0:
            raise BopeError("l2 and min_child_weight cannot both be 0")


@dataclass(frozen=True)
class ConstantConfig:
    """Prior-only model: predicts the training label mean. Useful as a CV baseline."""


ClassifierConfig = Union[LinearConfig, GBTConfig, ConstantConfig]


def boosting_rounds_for(n: int) -> int:
    """ceil(20 * sqrt(n)) boosting rounds for a training set of size n."""
    return int(math.ceil(20.0 * math.sqrt(n)))


def ensemble_size_for(n: int) -> int:
    """floor(10 * n ** (1/4)) ensemble members for a training set of size n."""
    return int(math.floor(10.0 * n ** 0.25))
