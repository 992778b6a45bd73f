"""Gradient boosted regression trees for log-loss and squared error."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from . import _backend
from .config import GBTConfig

_MAX_HALVINGS = 30
_REL_TOL = 1e-12


def _logloss(raw, y):
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def _sqloss(raw, y):
    return float(0.5 * np.mean((raw - y) ** 2))


class TreeEnsemble:
    """Fitted additive tree model; ``decision_function`` returns the raw score.

    Trees are stored flattened: node arrays are concatenated and ``roots``
    holds each tree's root index. Leaf values already include the shrinkage.
    """

    def __init__(self, base_score, feature, threshold, left, right, value, roots, n_features):
        self.base_score = float(base_score)
        self.feature = np.ascontiguousarray(feature, dtype=np.intp)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.intp)
        self.right = np.ascontiguousarray(right, dtype=np.intp)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.roots = np.ascontiguousarray(roots, dtype=np.intp)
        self.n_features = int(n_features)

    @property
    def n_trees(self):
        return self.roots.shape[0]

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        out = np.full(x.shape[0], self.base_score)
        _backend.predict_trees(x, self.feature, self.threshold, self.left, self.right,
                               self.value, self.roots, 1.0, out)
        return out


def fit_gbt(x: np.ndarray, y: np.ndarray, config: GBTConfig, loss: str, kernels=None):
    """Boost ``config.rounds`` trees on ``(x, y)``.

    ``loss`` is ``"log"`` (labels in {0, 1}) or ``"squared"``. Returns the
    ensemble and the per-round training-loss history (entry 0 is the loss of
    the constant base score).

    For log-loss a Newton step can overshoot; a tree whose shrunken step
    raises the training loss has its leaf values halved until the loss no
    longer increases, so the history is non-increasing by construction.
    Boosting stops early (history padded with the last loss) once a round
    improves the loss by less than 1e-12 relative.
    """
    kern = kernels if kernels is not None else _backend.kernels
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, p = x.shape
    xt = np.ascontiguousarray(x.T)
    order = np.ascontiguousarray(
        np.stack([np.argsort(xt[f], kind="stable") for f in range(p)]).astype(np.intp)
    )

    if loss == "log":
        ybar = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
        base = float(np.log(ybar / (1.0 - ybar)))
        loss_fn = _logloss
    elif loss == "squared":
        base = float(np.mean(y))
        loss_fn = _sqloss
    else:
        raise ValueError(f"unknown loss {loss!r}")

    raw = np.full(n, base)
    history = [loss_fn(raw, y)]
    feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
    offset = 0
    for rnd in range(config.rounds):
        if loss == "log":
            prob = expit(raw)
            g = prob - y
            h = prob * (1.0 - prob)
        else:
            g = raw - y
            h = np.ones(n)
        feature, threshold, left, right, value, leaf_of_row = kern.grow_tree(
            xt, order, np.ascontiguousarray(g), np.ascontiguousarray(h), config.depth,
            config.l2, config.min_leaf, config.min_child_weight,
        )
        step = config.learning_rate
        for _ in range(_MAX_HALVINGS):
            scaled = step * value
            trial = raw + scaled[leaf_of_row]
            trial_loss = loss_fn(trial, y)
            if trial_loss <= history[-1]:
                break
            step *= 0.5
        if not trial_loss < history[-1] - _REL_TOL * abs(history[-1]):
            # converged to rounding level; with raw unchanged every later round repeats this one
            history.extend([history[-1]] * (config.rounds - rnd))
            break
        raw = trial
        history.append(trial_loss)
        feats.append(feature)
        thrs.append(threshold)
        lefts.append(np.where(left >= 0, left + offset, -1))
        rights.append(np.where(right >= 0, right + offset, -1))
        vals.append(scaled)
        roots.append(offset)
        offset += feature.shape[0]

    def cat(parts, dtype):
        return np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)

    model = TreeEnsemble(base, cat(feats, np.intp), cat(thrs, np.float64), cat(lefts, np.intp),
                         cat(rights, np.intp), cat(vals, np.float64),
                         np.array(roots, dtype=np.intp), p)
    return model, history
