"""Balance and weight-quality diagnostics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import DISCRETE, LoggedDataset, ProposedActions
from .errors import DimensionMismatch, EmptyInput, NonPositiveTruth
from .weights import WeightVector


@dataclass(frozen=True)
class FeatureMap:
    """Action map ``phi`` and state map ``psi``, both vectorized over rows.

    ``phi(actions) -> (n, d_phi)``, ``psi(states) -> (n, d_psi)``.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    psi: Callable[[np.ndarray], np.ndarray]


def default_feature_map(kind: str, n_actions: Optional[int] = None) -> FeatureMap:
    """Lowest-order moments: one-hot (discrete) or [a, a^2] (continuous) actions,
    and the state row with a leading constant."""
    if kind == DISCRETE:
        def phi(a):
            out = np.zeros((a.shape[0], n_actions))
            out[np.arange(a.shape[0]), a] = 1.0
            return out
    else:
        def phi(a):
            a = a.astype(np.float64)
            return np.column_stack([a, a * a])

    def psi(s):
        return np.hstack([np.ones((s.shape[0], 1)), s])

    return FeatureMap(phi, psi)


@dataclass(frozen=True)
class BalanceReport:
    discrepancy: float
    gaps: np.ndarray
    dims: tuple
    # per-coordinate standard deviation of the unit-level differences
    unit_sd: np.ndarray = field(repr=False, default=None)


def _outer_rows(phi, psi):
    return (phi[:, :, None] * psi[:, None, :]).reshape(phi.shape[0], -1)


def l1_discrepancy(logged: LoggedDataset, proposed: ProposedActions, weights,
                   fmap: Optional[FeatureMap] = None) -> BalanceReport:
    """L1 norm of the gap between weighted logged moments and proposed moments.

    Coordinates are the row-major flattening of phi(a) (x) psi(s).
    """
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    n = logged.states.shape[0]
    if len(proposed) != n or w.shape[0] != n:
        raise DimensionMismatch("logged data, proposed actions and weights must have equal length")
    fmap = fmap if fmap is not None else default_feature_map(logged.kind, logged.n_actions)
    psi = np.asarray(fmap.psi(logged.states), dtype=np.float64)
    phi_logged = np.asarray(fmap.phi(logged.actions), dtype=np.float64)
    phi_prop = np.asarray(fmap.phi(proposed.actions), dtype=np.float64)
    if phi_logged.ndim == 1:
        phi_logged, phi_prop = phi_logged[:, None], phi_prop[:, None]
    if psi.ndim == 1:
        psi = psi[:, None]
    unit = w[:, None] * _outer_rows(phi_logged, psi) - _outer_rows(phi_prop, psi)
    gaps = unit.mean(axis=0)
    sd = unit.std(axis=0, ddof=1) if n > 1 else np.zeros_like(gaps)
    return BalanceReport(float(np.sum(np.abs(gaps))), gaps, (phi_logged.shape[1], psi.shape[1]), sd)


SQUARED_ERROR = "squared_error"
KL_STYLE = "kl_style"


def ratio_divergence(estimated, truth, kind: str = SQUARED_ERROR) -> float:
    """Mean squared error or mean generalized-KL term between estimated and true ratios."""
    est = np.asarray(estimated, dtype=np.float64)
    tru = np.asarray(truth, dtype=np.float64)
    if est.shape != tru.shape:
        raise DimensionMismatch("estimated and true ratios differ in length")
    if np.any(tru <= 0):
        raise NonPositiveTruth("true ratios must be positive")
    if kind == SQUARED_ERROR:
        return float(np.mean((est - tru) ** 2))
    if kind == KL_STYLE:
        return float(np.mean(tru * np.log(tru / est) - tru + est))
    raise ValueError(f"unknown divergence {kind!r}")


def weight_summary(weights) -> dict:
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise EmptyInput("no weights to summarize")
    sq = float(np.sum(w * w))
    ess = float(np.sum(w)) ** 2 / sq if sq > 0 else 0.0
    return {"mean": float(np.mean(w)), "max": float(np.max(w)), "effective_sample_size": ess}
