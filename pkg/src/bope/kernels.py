"""Smoothing kernels, bandwidth rule and the action-matching (rejection) term."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import CONTINUOUS, DISCRETE, Continuous, Discrete
from .errors import BopeError, VariantMismatch, ZeroScale

GAUSSIAN = "gaussian"
EPANECHNIKOV = "epanechnikov"
KERNELS = (GAUSSIAN, EPANECHNIKOV)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def kernel_eval(kind: str, u):
    """Evaluate a second-order kernel; scalar in, scalar out, array in, array out."""
    u = np.asarray(u, dtype=np.float64)
    if kind == GAUSSIAN:
        out = np.exp(-0.5 * u * u) * _INV_SQRT_2PI
    elif kind == EPANECHNIKOV:
        out = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)
    else:
        raise BopeError(f"unknown kernel {kind!r}")
    return float(out) if out.ndim == 0 else out


def kernel_roughness(kind: str) -> float:
    """Integral of K(u)^2 over the real line."""
    if kind == GAUSSIAN:
        return 1.0 / (2.0 * math.sqrt(math.pi))
    if kind == EPANECHNIKOV:
        return 0.6
    raise BopeError(f"unknown kernel {kind!r}")


def bandwidth_rule(n: int, action_scale: float, c: float = 1.0) -> float:
    """h = c * scale * n^(-1/5)."""
    if n < 2:
        raise BopeError("bandwidth rule needs n >= 2")
    if not action_scale > 0:
        raise ZeroScale("logged actions have zero spread")
    if not c > 0:
        raise BopeError("bandwidth constant must be > 0")
    # one Newton step on r^5 = n makes exact fifth powers (32, 10^5, ...) exact
    root = n ** 0.2
    root -= (root ** 5 - n) / (5.0 * root ** 4)
    return c * action_scale / root


def bandwidth_for_actions(actions, c: float = 1.0) -> float:
    """Bandwidth from the sample standard deviation of the logged actions."""
    a = np.asarray(actions, dtype=np.float64)
    scale = float(np.std(a, ddof=1)) if a.shape[0] > 1 else 0.0
    return bandwidth_rule(a.shape[0], scale, c)


@dataclass(frozen=True)
class DiscreteIndicator:
    pass


@dataclass(frozen=True)
class ContinuousKernel:
    kind: str = GAUSSIAN
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise BopeError(f"unknown kernel {self.kind!r}")
        if not self.bandwidth > 0:
            raise BopeError("bandwidth must be > 0")


@dataclass(frozen=True)
class NoRejection:
    """J = 1 for every unit.

    For density-ratio weights under a stochastic target the ratio already
    carries pi1(a|s); multiplying by a match term on one sampled a' would
    weight units by pi1^2 / pi0 instead of pi1 / pi0.
    """


RejectionSpec = Union[DiscreteIndicator, ContinuousKernel, NoRejection]


def _unwrap(a):
    if isinstance(a, Discrete):
        return np.asarray(a.index, dtype=np.int64)
    if isinstance(a, Continuous):
        return np.asarray(a.value, dtype=np.float64)
    return np.asarray(a)


def rejection_term(spec: RejectionSpec, a, a_prime):
    """Indicator 1{a == a'} or (1/h) K((a' - a)/h), elementwise."""
    a = _unwrap(a)
    a_prime = _unwrap(a_prime)
    if isinstance(spec, NoRejection):
        if a.shape != a_prime.shape:
            raise VariantMismatch("logged and proposed actions differ in shape")
        out = np.ones(a.shape, dtype=np.float64)
    elif isinstance(spec, DiscreteIndicator):
        if np.issubdtype(a.dtype, np.floating) or np.issubdtype(a_prime.dtype, np.floating):
            raise VariantMismatch("indicator rejection term needs discrete actions")
        out = (a == a_prime).astype(np.float64)
    elif isinstance(spec, ContinuousKernel):
        if np.issubdtype(a.dtype, np.integer) or np.issubdtype(a_prime.dtype, np.integer):
            raise VariantMismatch("kernel rejection term needs continuous actions")
        u = (a_prime.astype(np.float64) - a.astype(np.float64)) / spec.bandwidth
        out = np.asarray(kernel_eval(spec.kind, u)) / spec.bandwidth
    else:
        raise TypeError(f"unsupported rejection spec {spec!r}")
    return float(out) if out.ndim == 0 else out


def check_variant(spec: RejectionSpec, kind: str) -> None:
    if isinstance(spec, NoRejection):
        return
    want = DISCRETE if isinstance(spec, DiscreteIndicator) else CONTINUOUS
    if kind != want:
        raise VariantMismatch(f"{type(spec).__name__} used with {kind} actions")
