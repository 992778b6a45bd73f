"""CSV ingestion and the supervised-to-bandit transformations."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..classify import train_multiclass, train_regressor
from ..core import CONTINUOUS, DISCRETE, LoggedDataset, RngSpec, TabularDataset, make_logged_dataset
from ..errors import ParseError, SingleClass, TooFewRows

log = logging.getLogger(__name__)


def load_csv(path, label_column: str, mode: str, name: Optional[str] = None) -> TabularDataset:
    """Read a headed, comma-separated numeric table.

    Every column except ``label_column`` must be numeric. In discrete mode
    labels may be any strings and are re-indexed to 0..k-1 in sorted order
    (numeric order when all labels parse as numbers).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=0) from None
        if label_column not in header:
            raise ParseError(f"{path}: no column named {label_column!r}", row=1)
        li = header.index(label_column)
        feats, labels = [], []
        for rowno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {rowno} has {len(row)} fields, expected {len(header)}", row=rowno)
            vals = []
            for ci, cell in enumerate(row):
                if ci == li:
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {rowno}, column {header[ci]!r}: {cell!r} is not numeric",
                        row=rowno, col=header[ci],
                    ) from None
            feats.append(vals)
            labels.append(row[li].strip())
    if not feats:
        raise ParseError(f"{path}: no data rows", row=1)
    x = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ParseError(f"{path}: non-finite feature values")
    name = name or str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    if mode == DISCRETE:
        uniq = sorted(set(labels))
        try:
            uniq = sorted(uniq, key=float)
        except ValueError:
            pass
        if len(uniq) < 2:
            raise SingleClass(f"{path}: label column has a single class")
        index = {lab: i for i, lab in enumerate(uniq)}
        return TabularDataset(x, np.array([index[lab] for lab in labels], dtype=np.int64), name, len(uniq))
    try:
        y = np.array([float(v) for v in labels])
    except ValueError:
        bad = next(i for i, v in enumerate(labels) if not _is_float(v))
        raise ParseError(f"{path}: label {labels[bad]!r} is not numeric", row=bad + 2, col=label_column) from None
    if not np.all(np.isfinite(y)):
        raise ParseError(f"{path}: non-finite labels")
    return TabularDataset(x, y, name, None)


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True


def filter_rare_classes(data: TabularDataset, min_count: int) -> TabularDataset:
    """Drop classes with fewer than ``min_count`` rows and re-index the rest."""
    counts = np.bincount(data.label, minlength=data.n_classes)
    keep_cls = np.flatnonzero(counts >= min_count)
    if keep_cls.shape[0] == data.n_classes:
        return data
    dropped = np.flatnonzero(counts < min_count).tolist()
    log.warning("%s: removing classes %s with fewer than %d rows", data.name, dropped, min_count)
    if keep_cls.shape[0] < 2:
        raise SingleClass(f"{data.name}: fewer than two classes survive the min-class-count filter")
    remap = np.full(data.n_classes, -1)
    remap[keep_cls] = np.arange(keep_cls.shape[0])
    mask = remap[data.label] >= 0
    return TabularDataset(data.features[mask], remap[data.label[mask]], data.name, int(keep_cls.shape[0]))


def split_half(n: int, rng: RngSpec):
    perm = rng.generator().permutation(n)
    half = n // 2
    return np.sort(perm[:half]), np.sort(perm[half:])


@dataclass(frozen=True)
class BanditProblem:
    """One train/test split with a fixed target policy.

    ``draw(rng)`` produces the logged data for one replication:
    ``(logged_train, logged_test)``; proposed actions stay fixed.
    """

    name: str
    kind: str
    n_actions: Optional[int]
    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    proposed_train: np.ndarray
    proposed_test: np.ndarray
    truth: float

    def _reward(self, a, y):
        if self.kind == DISCRETE:
            return (a == y).astype(np.float64)
        return -np.abs(a - y)

    def _actions(self, gen, n):
        if self.kind == DISCRETE:
            return gen.integers(0, self.n_actions, size=n)
        return self.y_train[gen.integers(0, self.y_train.shape[0], size=n)]

    def draw(self, rng: RngSpec):
        gen = rng.generator()
        a_tr = self._actions(gen, self.x_train.shape[0])
        a_te = self._actions(gen, self.x_test.shape[0])
        train = make_logged_dataset(self.x_train, a_tr, self._reward(a_tr, self.y_train), self.n_actions)
        test = make_logged_dataset(self.x_test, a_te, self._reward(a_te, self.y_test), self.n_actions)
        return train, test


def classification_to_bandit(data: TabularDataset, target_model, rng: RngSpec,
                             min_class_count: int = 1) -> BanditProblem:
    """k-class classification -> k-armed bandit with uniform logging.

    The target policy is a classifier fit on the train half and plays its
    predicted label; reward is 1 when the action equals the true label.
    """
    if data.n_classes is None or data.n_classes < 2:
        raise SingleClass(f"{data.name}: classification needs k >= 2")
    data = filter_rare_classes(data, min_class_count)
    k = data.n_classes
    if data.n < 4 * k:
        raise TooFewRows(f"{data.name}: {data.n} rows for k={k} (need at least {4 * k})")
    tr, te = split_half(data.n, rng.child(0))
    x_tr, y_tr, x_te, y_te = data.features[tr], data.label[tr], data.features[te], data.label[te]
    cfg = target_model.resolve(tr.shape[0], "ensemble") if hasattr(target_model, "resolve") else target_model
    policy = train_multiclass(x_tr, y_tr, k, cfg, rng.child(1))
    prop_tr, prop_te = policy.predict(x_tr), policy.predict(x_te)
    truth = float(np.mean(prop_te == y_te))
    return BanditProblem(data.name, DISCRETE, k, x_tr, y_tr, x_te, y_te, prop_tr, prop_te, truth)


def regression_to_bandit(data: TabularDataset, target_model, rng: RngSpec) -> BanditProblem:
    """Regression -> continuous-action bandit.

    The target policy is a regressor fit on the train half; logged actions are
    i.i.d. draws from the empirical train-label distribution; reward is the
    negative absolute distance to the true label.
    """
    if data.n < 8:
        raise TooFewRows(f"{data.name}: {data.n} rows (need at least 8)")
    tr, te = split_half(data.n, rng.child(0))
    x_tr, y_tr, x_te, y_te = data.features[tr], data.label[tr], data.features[te], data.label[te]
    cfg = target_model.resolve(tr.shape[0], "ensemble") if hasattr(target_model, "resolve") else target_model
    policy = train_regressor(x_tr, y_tr, cfg, rng.child(1))
    prop_tr, prop_te = policy.predict(x_tr), policy.predict(x_te)
    truth = float(-np.mean(np.abs(prop_te - y_te)))
    return BanditProblem(data.name, CONTINUOUS, None, x_tr, y_tr.astype(np.float64), x_te,
                         y_te.astype(np.float64), prop_tr, prop_te, truth)
