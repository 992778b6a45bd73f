"""Training entry points, fitted model wrappers and loss-driven model selection."""
from __future__ import annotations

import json
from dataclasses import asdict
from typing import Optional

import numpy as np
from scipy.special import expit

from ..core import RngSpec, as_state_matrix
from ..errors import (
    DimensionMismatch,
    FoldTooSmall,
    LengthMismatch,
    NonFiniteValue,
    SingleClass,
)
from .config import ConstantConfig, GBTConfig, LinearConfig
from .gbt import TreeEnsemble, fit_gbt
from .linear import fit_logistic, fit_ridge, linear_score

PROBA_CLAMP = 1e-12
FORMAT_VERSION = 1


class _Fitted:
    """Shared raw-score machinery for linear, tree and constant models."""

    def __init__(self, family, n_features, *, beta=None, ensemble=None, constant=None):
        self.family = family
        self.n_features = int(n_features)
        self.beta = beta
        self.ensemble = ensemble
        self.constant = constant

    def _check(self, x):
        x = as_state_matrix(x)
        if x.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {x.shape[1]}")
        return x

    def raw_score(self, x) -> np.ndarray:
        x = self._check(x)
        if self.family == "linear":
            return linear_score(self.beta, x)
        if self.family == "gbt":
            return self.ensemble.decision_function(x)
        return np.full(x.shape[0], self.constant)

    def to_dict(self) -> dict:
        out = {"format": "bope-model", "version": FORMAT_VERSION, "kind": self.kind,
               "family": self.family, "n_features": self.n_features}
        if self.family == "linear":
            out["intercept"] = float(self.beta[0])
            out["coef"] = [float(b) for b in self.beta[1:]]
        elif self.family == "gbt":
            e = self.ensemble
            out["base_score"] = e.base_score
            out["trees"] = []
            for t, root in enumerate(e.roots):
                end = e.roots[t + 1] if t + 1 < e.n_trees else e.feature.shape[0]
                sl = slice(root, end)
                out["trees"].append({
                    "feature": e.feature[sl].tolist(),
                    "threshold": e.threshold[sl].tolist(),
                    "left": (np.where(e.left[sl] >= 0, e.left[sl] - root, -1)).tolist(),
                    "right": (np.where(e.right[sl] >= 0, e.right[sl] - root, -1)).tolist(),
                    "value": e.value[sl].tolist(),
                })
        else:
            out["constant"] = float(self.constant)
        return out


class ProbabilisticClassifier(_Fitted):
    """Binary scorer estimating p(C=1 | x) under log-loss."""

    kind = "classifier"

    def predict_proba(self, x) -> np.ndarray:
        return np.clip(expit(self.raw_score(x)), PROBA_CLAMP, 1.0 - PROBA_CLAMP)


class Regressor(_Fitted):
    """Squared-error regression model."""

    kind = "regressor"

    def predict(self, x) -> np.ndarray:
        return self.raw_score(x)


def constant_classifier(prob: float, n_features: int) -> ProbabilisticClassifier:
    """Classifier that predicts ``prob`` everywhere."""
    p = float(np.clip(prob, PROBA_CLAMP, 1 - PROBA_CLAMP))
    return ProbabilisticClassifier("constant", n_features, constant=float(np.log(p / (1 - p))))


def _check_xy(features, targets):
    x = as_state_matrix(features)
    y = np.asarray(targets, dtype=np.float64).ravel()
    if x.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise NonFiniteValue("targets contain NaN or infinite values")
    return x, y


def train_classifier(features, labels, config, rng: Optional[RngSpec] = None) -> ProbabilisticClassifier:
    """Fit a log-loss classifier on binary labels.

    Training is deterministic; ``rng`` is accepted for interface uniformity
    (none of the shipped families draw random numbers).
    """
    x, y = _check_xy(features, labels)
    if not np.all((y == 0) | (y == 1)):
        raise SingleClass("labels must be 0 or 1")
    if y.min() == y.max():
        raise SingleClass("training labels contain a single class")
    if isinstance(config, LinearConfig):
        beta, _ = fit_logistic(x, y, config)
        return ProbabilisticClassifier("linear", x.shape[1], beta=beta)
    if isinstance(config, GBTConfig):
        ensemble, history = fit_gbt(x, y, config, "log")
        model = ProbabilisticClassifier("gbt", x.shape[1], ensemble=ensemble)
        model.loss_history = history
        return model
    if isinstance(config, ConstantConfig):
        return constant_classifier(float(y.mean()), x.shape[1])
    raise TypeError(f"unsupported classifier config {config!r}")


def predict_proba(model: ProbabilisticClassifier, features) -> np.ndarray:
    return model.predict_proba(features)


def train_regressor(features, targets, config, rng: Optional[RngSpec] = None) -> Regressor:
    x, y = _check_xy(features, targets)
    if isinstance(config, LinearConfig):
        return Regressor("linear", x.shape[1], beta=fit_ridge(x, y, config.l2))
    if isinstance(config, GBTConfig):
        ensemble, history = fit_gbt(x, y, config, "squared")
        model = Regressor("gbt", x.shape[1], ensemble=ensemble)
        model.loss_history = history
        return model
    if isinstance(config, ConstantConfig):
        return Regressor("constant", x.shape[1], constant=float(np.mean(y)))
    raise TypeError(f"unsupported regressor config {config!r}")


def log_loss(labels, probs) -> float:
    p = np.clip(np.asarray(probs, dtype=np.float64), PROBA_CLAMP, 1 - PROBA_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def stratified_folds(labels, folds: int, rng: RngSpec) -> np.ndarray:
    """Fold id per row; each class is shuffled then dealt round-robin."""
    y = np.asarray(labels)
    gen = rng.generator()
    fold_of = np.empty(y.shape[0], dtype=np.intp)
    start = 0
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[gen.permutation(idx.shape[0])]
        fold_of[idx] = (start + np.arange(idx.shape[0])) % folds
        start += idx.shape[0]
    return fold_of


def cross_validated_loss(config, features, labels, folds: int, rng: RngSpec) -> float:
    """Mean held-out log-loss over stratified folds."""
    x, y = _check_xy(features, labels)
    if folds < 2:
        raise FoldTooSmall(f"need at least 2 folds, got {folds}")
    if y.min() == y.max():
        raise SingleClass("labels contain a single class")
    if folds > min(np.sum(y == 0), np.sum(y == 1)):
        raise FoldTooSmall(f"{folds} folds cannot each hold both classes")
    fold_of = stratified_folds(y, folds, rng)
    losses = []
    for k in range(folds):
        test = fold_of == k
        model = train_classifier(x[~test], y[~test], config, rng.child(k))
        losses.append(log_loss(y[test], model.predict_proba(x[test])))
    return float(np.mean(losses))


class MulticlassClassifier:
    """One-vs-rest log-loss classifiers; probabilities renormalized per row."""

    def __init__(self, members, n_classes):
        self.members = members
        self.n_classes = n_classes

    def predict_proba(self, x) -> np.ndarray:
        scores = np.column_stack([m.predict_proba(x) for m in self.members])
        return scores / scores.sum(axis=1, keepdims=True)

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1).astype(np.int64)


def train_multiclass(features, labels, n_classes: int, config, rng: Optional[RngSpec] = None) -> MulticlassClassifier:
    x = as_state_matrix(features)
    y = np.asarray(labels, dtype=np.int64)
    members = []
    for c in range(n_classes):
        target = (y == c).astype(np.float64)
        if target.min() == target.max():
            members.append(constant_classifier(float(target[0]), x.shape[1]))
        else:
            members.append(train_classifier(x, target, config, rng.child(c) if rng else None))
    return MulticlassClassifier(members, n_classes)


def model_from_dict(data: dict):
    if data.get("format") != "bope-model" or data.get("version") != FORMAT_VERSION:
        raise ValueError("not a bope-model v1 document")
    cls = ProbabilisticClassifier if data["kind"] == "classifier" else Regressor
    family, p = data["family"], data["n_features"]
    if family == "linear":
        return cls("linear", p, beta=np.array([data["intercept"]] + data["coef"], dtype=np.float64))
    if family == "constant":
        return cls("constant", p, constant=data["constant"])
    parts = {k: [] for k in ("feature", "threshold", "left", "right", "value")}
    roots, offset = [], 0
    for tree in data["trees"]:
        roots.append(offset)
        for key in ("feature", "threshold", "value"):
            parts[key].extend(tree[key])
        for key in ("left", "right"):
            parts[key].extend(c + offset if c >= 0 else -1 for c in tree[key])
        offset += len(tree["feature"])
    ens = TreeEnsemble(data["base_score"], parts["feature"], parts["threshold"], parts["left"],
                       parts["right"], parts["value"], roots, p)
    return cls("gbt", p, ensemble=ens)


def dump_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def config_to_dict(config) -> dict:
    return {"family": type(config).__name__, **asdict(config)}
