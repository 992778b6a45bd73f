"""Importance weights: classifier-based balancing weights and propensity baselines.

The balancing weights come from a classifier trained to tell logged
state-action pairs (label 0) from proposed ones (label 1). With equally many
rows per label, the odds p/(1-p) estimate the target-to-logging density ratio.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .classify import (
    GBTConfig,
    MulticlassClassifier,
    ProbabilisticClassifier,
    Regressor,
    train_classifier,
    train_multiclass,
    train_regressor,
)
from .core import CONTINUOUS, DISCRETE, LoggedDataset, ProposedActions, RngSpec
from .errors import (
    BopeError,
    DimensionMismatch,
    FoldTooSmall,
    LengthMismatch,
    MissingK,
    OutOfRange,
    VariantMismatch,
)

log = logging.getLogger(__name__)

DEFAULT_CLIP = 1e-3
DEFAULT_DENSITY_FLOOR = 1e-6
VARIANCE_FLOOR = 1e-8


@dataclass(frozen=True)
class WeightVector:
    """Per-unit importance weights with clipping metadata.

    ``clip_epsilon`` is the probability clip for classifier weights or the
    density floor for propensity weights; ``folds`` is 0 when the weights came
    from a model fitted on a separate sample. ``proposed`` optionally holds
    the same ratio evaluated at each unit's proposed pair (s, a'); SWITCH uses
    it to decide where the reward model stands in for the target.
    """

    weights: np.ndarray
    clip_epsilon: float
    clipped_count: int
    folds: int
    source: str
    proposed: Optional[np.ndarray] = None

    def __len__(self):
        return self.weights.shape[0]

    def scaled(self, factor: float) -> "WeightVector":
        prop = None if self.proposed is None else self.proposed * factor
        return WeightVector(self.weights * factor, self.clip_epsilon, self.clipped_count,
                            self.folds, self.source, prop)


@dataclass(frozen=True)
class DiscriminationSet:
    features: np.ndarray
    labels: np.ndarray
    n: int


def encode_state_action(states, actions, n_actions: Optional[int] = None) -> np.ndarray:
    """Append a one-hot action block (discrete) or the raw action column (continuous)."""
    x = np.asarray(states, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    a = np.asarray(actions)
    if a.shape[0] != x.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} states but {a.shape[0]} actions")
    if np.issubdtype(a.dtype, np.integer):
        if n_actions is None:
            raise MissingK("discrete actions need the number of actions k")
        if a.size and (a.min() < 0 or a.max() >= n_actions):
            raise DimensionMismatch(f"action index outside 0..{n_actions - 1}")
        onehot = np.zeros((x.shape[0], n_actions))
        onehot[np.arange(x.shape[0]), a] = 1.0
        return np.hstack([x, onehot])
    return np.hstack([x, a.astype(np.float64)[:, None]])


def _encode(logged: LoggedDataset, actions) -> np.ndarray:
    k = logged.n_actions if logged.kind == DISCRETE else None
    return encode_state_action(logged.states, actions, k)


def build_discrimination_set(logged: LoggedDataset, proposed: ProposedActions) -> DiscriminationSet:
    """Observed block (label 0) stacked over proposed block (label 1)."""
    n = logged.states.shape[0]
    if n == 0 or len(proposed) != n:
        raise LengthMismatch(f"need matching non-empty blocks, got {n} logged and {len(proposed)} proposed")
    if proposed.kind != logged.kind:
        raise VariantMismatch("proposed and logged actions differ in variant")
    features = np.vstack([_encode(logged, logged.actions), _encode(logged, proposed.actions)])
    labels = np.concatenate([np.zeros(n), np.ones(n)])
    return DiscriminationSet(features, labels, n)


def _check_eps(clip_epsilon):
    if not 0 < clip_epsilon < 0.5:
        raise OutOfRange(f"clip_epsilon must lie in (0, 0.5), got {clip_epsilon}")


def ratio_from_probability(p_hat, clip_epsilon: float = DEFAULT_CLIP):
    """Odds p/(1-p) with p clamped to [eps, 1-eps]."""
    _check_eps(clip_epsilon)
    p = np.asarray(p_hat, dtype=np.float64)
    if not np.all((p > 0) & (p < 1)):
        raise OutOfRange("classifier probabilities must lie strictly inside (0, 1)")
    q = np.clip(p, clip_epsilon, 1.0 - clip_epsilon)
    out = q / (1.0 - q)
    return float(out) if out.ndim == 0 else out


def weights_from_classifier(model: ProbabilisticClassifier, logged: LoggedDataset,
                            clip_epsilon: float = DEFAULT_CLIP, folds: int = 0,
                            proposed: Optional[ProposedActions] = None) -> WeightVector:
    """Balancing weights at the logged pairs from an already fitted discriminator.

    With ``proposed`` the ratio at each (s, a') is returned as well.
    """
    _check_eps(clip_epsilon)
    p = model.predict_proba(_encode(logged, logged.actions))
    clipped = int(np.sum((p < clip_epsilon) | (p > 1 - clip_epsilon)))
    at_prop = None
    if proposed is not None:
        at_prop = ratio_from_probability(model.predict_proba(_encode(logged, proposed.actions)), clip_epsilon)
    return WeightVector(ratio_from_probability(p, clip_epsilon), clip_epsilon, clipped, folds, "bope", at_prop)


def fit_discriminator(logged: LoggedDataset, proposed: ProposedActions, config,
                      rng: Optional[RngSpec] = None) -> ProbabilisticClassifier:
    """Train the logged-vs-proposed classifier on the full discrimination set."""
    ds = build_discrimination_set(logged, proposed)
    return train_classifier(ds.features, ds.labels, config, rng)


def estimate_bope_weights(logged: LoggedDataset, proposed: ProposedActions, config,
                          folds: int = 5, clip_epsilon: float = DEFAULT_CLIP,
                          rng: Optional[RngSpec] = None) -> WeightVector:
    """Cross-fitted balancing weights.

    Units are split into ``folds`` groups; for each group a classifier is
    trained on the observed and proposed rows of the other groups and scores
    the group's observed and proposed rows. Rewards are never read.
    """
    _check_eps(clip_epsilon)
    n = logged.states.shape[0]
    if folds < 2:
        raise FoldTooSmall(f"cross-fitting needs at least 2 folds, got {folds}")
    if folds > n:
        raise FoldTooSmall(f"{folds} folds for only {n} units")
    ds = build_discrimination_set(logged, proposed)
    rng = rng if rng is not None else RngSpec(0)
    perm = rng.generator().permutation(n)
    fold_of = np.empty(n, dtype=np.intp)
    fold_of[perm] = np.arange(n) % folds

    p = np.empty(n)
    p_prop = np.empty(n)
    for k in range(folds):
        held = fold_of == k
        train_rows = np.concatenate([~held, ~held])
        model = train_classifier(ds.features[train_rows], ds.labels[train_rows], config, rng.child(k))
        p[held] = model.predict_proba(ds.features[:n][held])
        p_prop[held] = model.predict_proba(ds.features[n:][held])
    clipped = int(np.sum((p < clip_epsilon) | (p > 1 - clip_epsilon)))
    return WeightVector(ratio_from_probability(p, clip_epsilon), clip_epsilon, clipped, folds, "bope",
                        ratio_from_probability(p_prop, clip_epsilon))


@dataclass(frozen=True)
class DiscretePropensity:
    """Per-state action probabilities over k actions."""

    model: MulticlassClassifier
    n_actions: int

    def probabilities(self, states) -> np.ndarray:
        return self.model.predict_proba(states)

    def density(self, states, actions) -> np.ndarray:
        probs = self.probabilities(states)
        return probs[np.arange(probs.shape[0]), np.asarray(actions, dtype=np.int64)]


@dataclass(frozen=True)
class GaussianPropensity:
    """Generalized propensity score: a | s ~ Normal(mean_model(s), variance)."""

    mean_model: Regressor
    variance: float
    variance_floored: bool = False

    def density(self, states, actions) -> np.ndarray:
        resid = np.asarray(actions, dtype=np.float64) - self.mean_model.predict(states)
        return np.exp(-0.5 * resid * resid / self.variance) / math.sqrt(2.0 * math.pi * self.variance)


PropensityModel = Union[DiscretePropensity, GaussianPropensity]


def fit_propensity(logged: LoggedDataset, config=None, rng: Optional[RngSpec] = None):
    """Fit a logging-policy model on a training split.

    Discrete: one-vs-rest classifiers over the k actions. Continuous: a mean
    regressor with variance equal to its training MSE (floored at 1e-8, in
    which case ``variance_floored`` is set).
    """
    config = config if config is not None else GBTConfig()
    if logged.kind == DISCRETE:
        k = logged.n_actions
        if k is None or k < 2:
            raise BopeError("discrete propensity model needs k >= 2")
        return DiscretePropensity(train_multiclass(logged.states, logged.actions, k, config, rng), k)
    mean_model = train_regressor(logged.states, logged.actions, config, rng)
    mse = float(np.mean((logged.actions - mean_model.predict(logged.states)) ** 2))
    if mse < VARIANCE_FLOOR:
        log.warning("propensity residual variance %.3g below floor; using %g", mse, VARIANCE_FLOOR)
        return GaussianPropensity(mean_model, VARIANCE_FLOOR, True)
    return GaussianPropensity(mean_model, mse, False)


def propensity_weights(model, logged: LoggedDataset,
                       clip_epsilon_density: float = DEFAULT_DENSITY_FLOOR,
                       proposed: Optional[ProposedActions] = None) -> WeightVector:
    """Inverse propensity 1 / max(pi0_hat(a|s), floor).

    With ``proposed`` the inverse propensity at each (s, a') is returned as well.
    """
    want = DISCRETE if isinstance(model, DiscretePropensity) else CONTINUOUS
    if logged.kind != want:
        raise VariantMismatch(f"{type(model).__name__} cannot weight {logged.kind} actions")
    if not clip_epsilon_density > 0:
        raise OutOfRange("density floor must be > 0")
    dens = model.density(logged.states, logged.actions)
    hits = dens < clip_epsilon_density
    w = 1.0 / np.maximum(dens, clip_epsilon_density)
    at_prop = None
    if proposed is not None:
        at_prop = 1.0 / np.maximum(model.density(logged.states, proposed.actions), clip_epsilon_density)
    return WeightVector(w, clip_epsilon_density, int(hits.sum()), 0, "ips", at_prop)
