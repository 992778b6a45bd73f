"""Policy-value estimators that accept any per-unit weight vector.

Every weighted estimator uses the per-unit weight ``w_i = J(a_i, a'_i) * rho_i``
where ``J`` is the action-matching term and ``rho_i`` comes from a
:class:`~bope.weights.WeightVector` (propensity or classifier based).
``normalized=True`` rescales ``w`` to have mean one before applying the
plain formula, which for importance sampling is the Hajek ratio
``sum(w r) / sum(w)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .classify import GBTConfig, Regressor, train_regressor
from .core import DISCRETE, LoggedDataset, ProposedActions, RngSpec, as_state_matrix
from .errors import AllZeroWeights, DimensionMismatch, EmptyCandidates, NonFiniteValue
from .kernels import RejectionSpec, check_variant, rejection_term
from .weights import WeightVector, encode_state_action


class RewardModel:
    """Reward predictor r_hat(s, a) evaluated row-wise."""

    def __init__(self, predict: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self._predict = predict

    def predict(self, states, actions) -> np.ndarray:
        out = np.asarray(self._predict(as_state_matrix(states), np.asarray(actions)), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise NonFiniteValue("reward model produced non-finite predictions")
        return out

    @classmethod
    def constant(cls, value: float) -> "RewardModel":
        return cls(lambda s, a: np.full(s.shape[0], float(value)))

    @classmethod
    def from_regressor(cls, regressor: Regressor, n_actions: Optional[int] = None) -> "RewardModel":
        def predict(states, actions):
            k = n_actions if np.issubdtype(actions.dtype, np.integer) else None
            return regressor.predict(encode_state_action(states, actions, k))

        return cls(predict)


def fit_reward_model(logged: LoggedDataset, config=None, rng: Optional[RngSpec] = None) -> RewardModel:
    """Regress rewards on encoded (state, action) features."""
    config = config if config is not None else GBTConfig()
    k = logged.n_actions if logged.kind == DISCRETE else None
    reg = train_regressor(encode_state_action(logged.states, logged.actions, k), logged.rewards, config, rng)
    return RewardModel.from_regressor(reg, k)


@dataclass(frozen=True)
class EstimatorResult:
    value: float
    n_effective: float
    clipped_count: int = 0
    tau_used: Optional[float] = None


def _check_lengths(logged, proposed, weights=None):
    n = logged.states.shape[0]
    if len(proposed) != n or (weights is not None and len(weights) != n):
        raise DimensionMismatch("logged data, proposed actions and weights must have equal length")


def _unit_weights(logged, proposed, weights, rejection, normalized):
    _check_lengths(logged, proposed, weights)
    check_variant(rejection, logged.kind)
    j = np.asarray(rejection_term(rejection, logged.actions, proposed.actions), dtype=np.float64)
    w = j * weights.weights
    if normalized:
        total = float(np.sum(w))
        if total <= 0:
            raise AllZeroWeights("every unit has zero weight: no overlap between logged and proposed actions")
        w = w * (w.shape[0] / total)
    return w


def direct_method(model: RewardModel, states, proposed: ProposedActions) -> EstimatorResult:
    x = as_state_matrix(states)
    if x.shape[0] != len(proposed):
        raise DimensionMismatch("states and proposed actions differ in length")
    return EstimatorResult(float(np.mean(model.predict(x, proposed.actions))), float(x.shape[0]))


def importance_sampling(logged: LoggedDataset, proposed: ProposedActions, weights: WeightVector,
                        rejection: RejectionSpec, normalized: bool = True) -> EstimatorResult:
    _check_lengths(logged, proposed, weights)
    check_variant(rejection, logged.kind)
    j = np.asarray(rejection_term(rejection, logged.actions, proposed.actions), dtype=np.float64)
    w = j * weights.weights
    total = float(np.sum(w))
    if normalized:
        if total <= 0:
            raise AllZeroWeights("every unit has zero weight: no overlap between logged and proposed actions")
        value = float(np.sum(w * logged.rewards) / total)
    else:
        value = float(np.mean(w * logged.rewards))
    return EstimatorResult(value, total, weights.clipped_count)


def doubly_robust(logged: LoggedDataset, proposed: ProposedActions, model: RewardModel,
                  weights: WeightVector, rejection: RejectionSpec,
                  normalized: bool = False) -> EstimatorResult:
    w = _unit_weights(logged, proposed, weights, rejection, normalized)
    r_logged = model.predict(logged.states, logged.actions)
    r_prop = model.predict(logged.states, proposed.actions)
    terms = (logged.rewards - r_logged) * w + r_prop
    return EstimatorResult(float(np.mean(terms)), float(np.sum(w)), weights.clipped_count)


def _switch_terms(logged, proposed, model, weights, rejection, tau, dr_flavor, normalized):
    w = _unit_weights(logged, proposed, weights, rejection, normalized)
    r_prop = model.predict(logged.states, proposed.actions)
    if weights.proposed is None:
        if dr_flavor:
            kept = (logged.rewards - model.predict(logged.states, logged.actions)) * w + r_prop
        else:
            kept = w * logged.rewards
        switched = weights.weights > tau
        return np.where(switched, r_prop, kept), switched, w
    # the IS part keeps low-ratio logged pairs; the model covers high-ratio proposed pairs
    kept = weights.weights <= tau
    switched = weights.proposed > tau
    if dr_flavor:
        resid = logged.rewards - model.predict(logged.states, logged.actions)
        terms = np.where(kept, resid * w, 0.0) + r_prop
    else:
        terms = np.where(kept, w * logged.rewards, 0.0) + np.where(switched, r_prop, 0.0)
    return terms, switched, w


def switch_estimator(logged: LoggedDataset, proposed: ProposedActions, model: RewardModel,
                     weights: WeightVector, rejection: RejectionSpec, tau: float,
                     dr_flavor: bool = False, normalized: bool = False) -> EstimatorResult:
    """Per unit: weighted term when rho_i <= tau, else the reward model at a'_i.

    The threshold applies to the importance ratio itself (not ``J * rho``) so
    tau means the same thing for discrete and continuous actions. When the
    weights carry ratios at the proposed pairs, the reward-model term is
    switched on by the proposed pair's ratio instead, so the two parts
    partition the target's action mass and the estimate stays unbiased.
    """
    terms, _, w = _switch_terms(logged, proposed, model, weights, rejection, tau, dr_flavor, normalized)
    return EstimatorResult(float(np.mean(terms)), float(np.sum(w)), weights.clipped_count, float(tau))


def tune_switch_tau(logged: LoggedDataset, proposed: ProposedActions, model: RewardModel,
                    weights: WeightVector, rejection: RejectionSpec, candidates: Sequence[float],
                    dr_flavor: bool = False, normalized: bool = False):
    """Pick tau minimizing a mean-squared-error proxy.

    proxy(tau) = var(per-unit terms) / n + (max|r| * fraction of units switched)^2

    The variance part tracks the weighted terms kept; the squared part bounds
    the bias from replacing observed rewards with model predictions. Ties go
    to the smallest tau. Returns ``(tau, EstimatorResult)``.
    """
    cands = sorted(float(c) for c in candidates)
    if not cands:
        raise EmptyCandidates("no tau candidates supplied")
    n = logged.states.shape[0]
    bound = float(np.max(np.abs(logged.rewards)))
    best = None
    for tau in cands:
        terms, switched, w = _switch_terms(logged, proposed, model, weights, rejection, tau,
                                           dr_flavor, normalized)
        var = float(np.var(terms, ddof=1)) if n > 1 else 0.0
        proxy = var / n + (bound * float(np.mean(switched))) ** 2
        if best is None or proxy < best[0]:
            best = (proxy, tau, terms, w)
    _, tau, terms, w = best
    return tau, EstimatorResult(float(np.mean(terms)), float(np.sum(w)), weights.clipped_count, tau)


def quantile_candidates(weights: WeightVector, levels: Sequence[float]) -> list:
    """tau candidates at weight quantiles; a level of ``inf`` yields tau = inf."""
    out = []
    for q in levels:
        if math.isinf(q):
            out.append(math.inf)
        else:
            out.append(float(np.quantile(weights.weights, q)))
    return out
