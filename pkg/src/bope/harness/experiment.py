"""Replication loop, metric aggregation and report files."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional

import numpy as np

from .. import __version__
from ..classify import BACKEND
from ..core import CONTINUOUS, DISCRETE, RngSpec
from ..diagnostics import l1_discrepancy, weight_summary
from ..errors import BopeError, EmptyInput
from ..estimators import (
    direct_method,
    doubly_robust,
    fit_reward_model,
    importance_sampling,
    quantile_candidates,
    tune_switch_tau,
)
from ..kernels import ContinuousKernel, DiscreteIndicator, NoRejection, bandwidth_for_actions, rejection_term
from ..synthetic import (
    generate_logged,
    load_preset,
    make_classification_data,
    make_regression_data,
    sample_target,
    target_is_stochastic,
    true_value,
)
from ..weights import (
    WeightVector,
    estimate_bope_weights,
    fit_discriminator,
    fit_propensity,
    propensity_weights,
    weights_from_classifier,
)
from .config import ExperimentConfig, config_hash, format_config
from .data import BanditProblem, classification_to_bandit, load_csv, regression_to_bandit

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("dataset", "estimator", "weight_source", "bias", "rmse", "rmse_se",
                  "balance_l1", "mean_ess", "replications_used")
REPLICATION_COLUMNS = ("replication", "estimator", "weight_source", "estimate", "truth",
                       "balance_l1", "ess", "tau", "error")
WEIGHT_SOURCES = ("ips", "bope")


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    estimator: str
    weight_source: str
    bias: float
    rmse: float
    rmse_se: float
    balance_l1: float
    mean_ess: float
    replications_used: int


def summarize(estimates, truth: float):
    """(bias, rmse, se of rmse); the se comes from the squared errors via the delta method."""
    est = np.asarray(estimates, dtype=np.float64)
    if est.size == 0:
        raise EmptyInput("no estimates to summarize")
    err = est - truth
    bias = float(np.mean(err))
    sq = err * err
    rmse = float(math.sqrt(np.mean(sq)))
    if est.size < 2 or rmse == 0.0:
        return bias, rmse, 0.0
    se_mse = float(np.std(sq, ddof=1) / math.sqrt(est.size))
    return bias, rmse, se_mse / (2.0 * rmse)


@dataclass(frozen=True)
class OracleSource:
    """Fresh train and test samples from an oracle bandit for every replication."""

    name: str
    oracle: object
    n_train: int
    n_test: int
    truth: float

    @property
    def kind(self):
        return self.oracle.kind

    @property
    def stochastic_target(self):
        return target_is_stochastic(self.oracle)

    def draw(self, rng: RngSpec):
        train = generate_logged(self.oracle, self.n_train, rng.child(10))
        test = generate_logged(self.oracle, self.n_test, rng.child(11))
        return train, sample_target(self.oracle, train, rng.child(12)), test, sample_target(self.oracle, test, rng.child(13))


def _draw(source, rng):
    if isinstance(source, OracleSource):
        return source.draw(rng)
    from ..core import make_proposed
    train, test = source.draw(rng)
    return train, make_proposed(source.proposed_train, train), test, make_proposed(source.proposed_test, test)


def build_source(cfg: ExperimentConfig):
    """Materialize the data source (split + target policy, or oracle)."""
    root = RngSpec(cfg.seed, 0)
    if cfg.oracle:
        oracle = load_preset(cfg.oracle)
        if oracle.kind != cfg.mode:
            raise BopeError(f"oracle {oracle.name} is {oracle.kind} but mode is {cfg.mode}")
        return OracleSource(oracle.name, oracle, cfg.n_train or cfg.n, cfg.n, true_value(oracle).value)
    if cfg.dataset:
        data = load_csv(cfg.dataset, cfg.label_column, cfg.mode)
    else:
        data = _synthetic_data(cfg)
    if cfg.mode == DISCRETE:
        return classification_to_bandit(data, cfg.target_model, root.child(1), cfg.min_class_count)
    return regression_to_bandit(data, cfg.target_model, root.child(1))


def _synthetic_data(cfg):
    parts = cfg.synthetic.split()
    kind, opts = parts[0], {}
    for item in parts[1:]:
        if "=" not in item:
            raise BopeError(f"bad synthetic option {item!r}")
        k, v = item.split("=", 1)
        opts[k] = float(v) if k in ("separation", "noise") else int(v)
    if kind == "classification":
        if cfg.mode != DISCRETE:
            raise BopeError("synthetic classification data needs mode = discrete")
        return make_classification_data(**opts)
    if kind == "regression":
        if cfg.mode != CONTINUOUS:
            raise BopeError("synthetic regression data needs mode = continuous")
        return make_regression_data(**opts)
    raise BopeError(f"unknown synthetic generator {kind!r}")


def _effective(weights: WeightVector, j):
    w = j * weights.weights
    total = w.sum()
    return w * (w.shape[0] / total) if total > 0 else w


def run_replication(source, cfg: ExperimentConfig, r: int) -> list:
    """Evaluate every selected estimator on replication ``r``; returns record dicts."""
    rng = RngSpec(cfg.seed, 0).child(1000 + r)
    train, prop_train, test, prop_test = _draw(source, rng)
    n_fit = train.n
    truth = source.truth
    records = []

    def record(est, src, value=None, balance=math.nan, ess=math.nan, tau=math.nan, error=""):
        records.append({"replication": r, "estimator": est, "weight_source": src,
                        "estimate": value if value is not None else math.nan, "truth": truth,
                        "balance_l1": balance, "ess": ess, "tau": tau, "error": error})

    if cfg.mode == DISCRETE:
        rejection = DiscreteIndicator()
    else:
        rejection = ContinuousKernel(cfg.kernel, bandwidth_for_actions(test.actions, cfg.bandwidth_c))
    # a ratio estimate already carries pi1 for a randomizing target
    rejections = {"ips": rejection,
                  "bope": NoRejection() if getattr(source, "stochastic_target", False) else rejection}

    need_model = any(e in cfg.estimators for e in ("dm", "dr", "switch", "switch-dr"))
    reward_model = None
    if need_model:
        reward_model = fit_reward_model(train, cfg.dm_model.resolve(n_fit, "boost"), rng.child(1))
    if "dm" in cfg.estimators:
        record("dm", "none", direct_method(reward_model, test.states, prop_test).value)

    weight_sets = {}
    pmodel = fit_propensity(train, cfg.propensity_model.resolve(n_fit, "boost"), rng.child(2))
    weight_sets["ips"] = propensity_weights(pmodel, test, cfg.density_floor, prop_test)
    bope_cfg = cfg.bope_model.resolve(n_fit, "boost")
    if cfg.weight_fitting == "train_split":
        disc = fit_discriminator(train, prop_train, bope_cfg, rng.child(3))
        weight_sets["bope"] = weights_from_classifier(disc, test, cfg.clip_epsilon, proposed=prop_test)
    else:
        weight_sets["bope"] = estimate_bope_weights(test, prop_test, bope_cfg, cfg.folds,
                                                    cfg.clip_epsilon, rng.child(3))

    for est in cfg.estimators:
        if est == "dm":
            continue
        for src in WEIGHT_SOURCES:
            w = weight_sets[src]
            rej = rejections[src]
            j = np.asarray(rejection_term(rej, test.actions, prop_test.actions), dtype=np.float64)
            eff = _effective(w, j)
            balance = l1_discrepancy(test, prop_test, eff).discrepancy
            ess = weight_summary(eff)["effective_sample_size"] if eff.sum() > 0 else 0.0
            try:
                if est == "is":
                    res = importance_sampling(test, prop_test, w, rej, normalized=True)
                elif est == "dr":
                    res = doubly_robust(test, prop_test, reward_model, w, rej, normalized=True)
                else:
                    cands = quantile_candidates(w, cfg.switch_quantiles)
                    # raw weights: rescaling over all units would let switched units
                    # shrink the kept IS terms
                    _, res = tune_switch_tau(test, prop_test, reward_model, w, rej, cands,
                                             dr_flavor=(est == "switch-dr"), normalized=False)
            except BopeError as exc:
                log.warning("replication %d: %s/%s failed: %s", r, est, src, exc)
                record(est, src, None, balance, ess, error=type(exc).__name__)
                continue
            record(est, src, res.value, balance, ess,
                   res.tau_used if res.tau_used is not None else math.nan)
    return records


def _row_keys(cfg):
    keys = []
    if "dm" in cfg.estimators:
        keys.append(("dm", "none"))
    for est in cfg.estimators:
        if est != "dm":
            keys.extend((est, src) for src in WEIGHT_SOURCES)
    return keys


def aggregate(name: str, records: list, cfg: ExperimentConfig) -> list:
    rows = []
    for est, src in _row_keys(cfg):
        ok = [rec for rec in records if rec["estimator"] == est and rec["weight_source"] == src
              and not rec["error"]]
        if not ok:
            rows.append(ReportRow(name, est, src, math.nan, math.nan, math.nan, math.nan, math.nan, 0))
            continue
        ok.sort(key=lambda rec: rec["replication"])
        bias, rmse, se = summarize([rec["estimate"] for rec in ok], ok[0]["truth"])
        rows.append(ReportRow(name, est, src, bias, rmse, se,
                              float(np.mean([rec["balance_l1"] for rec in ok])),
                              float(np.mean([rec["ess"] for rec in ok])), len(ok)))
    return rows


def _g(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.6g}"
    return str(x)


def format_report(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for row in rows:
        writer.writerow([_g(getattr(row, c)) for c in REPORT_COLUMNS])
    return buf.getvalue()


def _replication_lines(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for rec in records:
        writer.writerow([_g(rec[c]) for c in REPLICATION_COLUMNS])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: list
    records: list
    failures: list
    metadata: dict


def run_experiment(cfg: ExperimentConfig, threads: int = 1, out: Optional[str] = None) -> ExperimentResult:
    """Run all replications; if ``out`` is given write the report, the
    per-replication stream and the metadata sidecar next to it."""
    source = build_source(cfg)
    out = out or cfg.output
    stream = None
    if out:
        stream = open(_sidecar(out, ".replications.csv"), "w", encoding="utf-8", newline="")
        stream.write(",".join(REPLICATION_COLUMNS) + "\n")
    worker = partial(run_replication, source, cfg)
    records = []
    try:
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = pool.map(worker, range(cfg.replications))
                for recs in results:
                    records.extend(recs)
                    if stream:
                        stream.write(_replication_lines(recs))
        else:
            for r in range(cfg.replications):
                recs = worker(r)
                records.extend(recs)
                if stream:
                    stream.write(_replication_lines(recs))
                    stream.flush()
    finally:
        if stream:
            stream.close()
    records.sort(key=lambda rec: rec["replication"])
    rows = aggregate(source.name, records, cfg)
    failures = [{"replication": rec["replication"], "estimator": rec["estimator"],
                 "weight_source": rec["weight_source"], "error": rec["error"]}
                for rec in records if rec["error"]]
    metadata = {
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "config": format_config(cfg.__class__(**{**cfg.__dict__, "output": None})),
        "dataset": source.name,
        "truth": source.truth,
        "replications": cfg.replications,
        "failures": failures,
        "versions": {"bope": __version__, "numpy": np.__version__,
                     "python": platform.python_version(), "tree_backend": BACKEND},
    }
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_report(rows))
        with open(_sidecar(out, ".meta.json"), "w", encoding="utf-8") as fh:
            json.dump(metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return ExperimentResult(rows, records, failures, metadata)


def _sidecar(out, suffix):
    base = out[:-4] if out.endswith(".csv") else out
    return base + suffix
