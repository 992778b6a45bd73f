"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``criterion N ...: PASS|FAIL`` line; the lines are
repeated in the pytest terminal summary.
"""
import math
import time

import numpy as np
import pytest
from scipy.integrate import trapezoid

from _cases import identity_errors, random_case
from bope.classify import GBTConfig
from bope.classify.gbt import fit_gbt
from bope.classify.linear import logistic_objective
from bope.cli import main
from bope.core import RngSpec
from bope.diagnostics import l1_discrepancy
from bope.estimators import (
    direct_method,
    doubly_robust,
    importance_sampling,
    quantile_candidates,
    tune_switch_tau,
)
from bope.harness import parse_config, run_experiment
from bope.kernels import DiscreteIndicator, NoRejection, bandwidth_rule, kernel_eval, kernel_roughness
from bope.synthetic import generate_logged, load_preset, sample_target, true_ratio, true_value
from bope.weights import estimate_bope_weights

IND = DiscreteIndicator()
SEEDS = range(50)


def test_criterion_1_oracle_consistency(verdict):
    p1 = load_preset("P1")
    truth = true_value(p1).value
    start = time.perf_counter()
    errors = []
    for seed in SEEDS:
        d = generate_logged(p1, 20000, RngSpec(seed, 1))
        prop = sample_target(p1, d, RngSpec(seed, 2))
        w = estimate_bope_weights(d, prop, GBTConfig(), folds=5, rng=RngSpec(seed, 3))
        errors.append(importance_sampling(d, prop, w, IND, normalized=True).value - truth)
    elapsed = time.perf_counter() - start
    mean_abs = float(np.mean(np.abs(errors)))
    within = int(np.sum(np.abs(errors) <= 0.05))
    ok = truth == 1.0 and mean_abs < 0.02 and within >= 48 and elapsed < 60.0
    verdict(1, "oracle consistency", ok,
            f"truth {truth:g}, mean |error| {mean_abs:.3g}, {within}/50 within 0.05, {elapsed:.1f} s")
    assert ok


def test_criterion_2_null_effect(verdict):
    p2 = load_preset("P2")
    null = p2.with_target(p2.pi0)
    means, hits = [], 0
    for seed in SEEDS:
        d = generate_logged(null, 2000, RngSpec(seed, 1))
        prop = sample_target(null, d, RngSpec(seed, 2))
        w = estimate_bope_weights(d, prop, GBTConfig(), folds=5, rng=RngSpec(seed, 3))
        # stochastic target: the ratio alone carries pi1 / pi0
        est = importance_sampling(d, prop, w, NoRejection(), normalized=True).value
        se = np.std(d.rewards, ddof=1) / math.sqrt(d.n)
        hits += abs(est - d.rewards.mean()) <= 3 * se
        means.append(float(w.weights.mean()))
    ok = min(means) >= 0.9 and max(means) <= 1.1 and hits == 50
    verdict(2, "null effect", ok,
            f"weight means in [{min(means):.4f}, {max(means):.4f}], {hits}/50 within 3 MC SE")
    assert ok


def test_criterion_3_imbalance_decay(verdict):
    p1 = load_preset("P1")
    wins = 0
    for seed in SEEDS:
        vals = []
        for n in (500, 10000):
            d = generate_logged(p1, n, RngSpec(seed, n))
            prop = sample_target(p1, d, RngSpec(seed, n + 1))
            w = estimate_bope_weights(d, prop, GBTConfig(), folds=5, rng=RngSpec(seed, n + 2))
            vals.append(l1_discrepancy(d, prop, w).discrepancy)
        wins += vals[1] < vals[0]
    n = 10000
    d = generate_logged(p1, n, RngSpec(99, 1))
    prop = sample_target(p1, d, RngSpec(99, 2))
    rep = l1_discrepancy(d, prop, true_ratio(p1, d.actions, d.states))
    bound = 3.0 * rep.unit_sd / math.sqrt(n)
    coord_ok = bool(np.all(np.abs(rep.gaps) <= bound))
    worst = float(np.max(np.abs(rep.gaps) / np.where(bound > 0, bound, np.inf)))
    ok = wins >= 45 and coord_ok
    verdict(3, "imbalance decay", ok,
            f"{wins}/50 seeds decrease; true-ratio worst |gap| / (3 sd/sqrt n) = {worst:.3f}")
    assert ok


def test_criterion_4_exact_identities(verdict):
    gen = np.random.default_rng(20240601)
    worst = {}
    for _ in range(1000):
        case = random_case(gen)
        assert case[0].n <= 64
        for name, err in identity_errors(case, gen).items():
            worst[name] = max(worst.get(name, 0.0), err)
    ok = all(v <= 1e-12 for v in worst.values()) and len(worst) == 7
    verdict(4, "exact estimator identities", ok,
            "max relative error " + ", ".join(f"{k} {v:.1e}" for k, v in sorted(worst.items())))
    assert ok


def test_criterion_5_kernel_analytics(verdict):
    checks = []
    for kind, lo, hi in (("gaussian", -8.0, 8.0), ("epanechnikov", -1.0, 1.0)):
        u = np.arange(lo, hi + 5e-5, 1e-4)
        k = kernel_eval(kind, u)
        checks.append(abs(trapezoid(k, u) - 1.0) <= 1e-6)
        checks.append(abs(trapezoid(k * k, u) - kernel_roughness(kind)) <= 1e-6)
    checks.append(abs(kernel_roughness("gaussian") - 0.282095) <= 1e-6)
    checks.append(abs(kernel_roughness("epanechnikov") - 0.6) <= 1e-6)
    h = bandwidth_rule(100000, 1, 1)
    checks.append(h == 0.1)
    ok = all(checks)
    verdict(5, "kernel analytics", ok, f"{sum(checks)}/{len(checks)} checks, bandwidth_rule(1e5,1,1) = {h!r}")
    assert ok


def test_criterion_6_numerical_soundness(verdict):
    gen = np.random.default_rng(6)
    worst_fd = 0.0
    for _ in range(50):
        x = gen.normal(size=(60, 3))
        y = (gen.random(60) < 0.4).astype(float)
        beta = gen.normal(size=4)
        _, grad = logistic_objective(beta, x, y, 0.05)
        fd = np.empty(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1e-6
            fd[j] = (logistic_objective(beta + e, x, y, 0.05)[0]
                     - logistic_objective(beta - e, x, y, 0.05)[0]) / 2e-6
        worst_fd = max(worst_fd, float(np.linalg.norm(grad - fd) / np.linalg.norm(fd)))
    monotone = True
    for seed in range(20):
        g = np.random.default_rng(seed)
        x = g.normal(size=(200, 3))
        for loss, y in (("log", (x[:, 0] * x[:, 1] > 0).astype(float)), ("squared", g.normal(size=200))):
            _, hist = fit_gbt(x, y, GBTConfig(rounds=40, learning_rate=1.0), loss)
            monotone &= bool(np.all(np.diff(hist) <= 0))
    finite = True
    for seed in range(300):
        g = np.random.default_rng(seed)
        d, prop, model, w, rej = random_case(g)
        vals = [direct_method(model, d.states, prop), doubly_robust(d, prop, model, w, rej),
                importance_sampling(d, prop, w, rej, normalized=False)]
        vals.append(tune_switch_tau(d, prop, model, w, rej, quantile_candidates(w, [0.5, math.inf]))[1])
        finite &= all(math.isfinite(v.value) and math.isfinite(v.n_effective) for v in vals)
        finite &= bool(np.all(np.isfinite(w.weights)))
    p2 = load_preset("P2")
    for seed in range(5):
        d = generate_logged(p2, 300, RngSpec(seed, 1))
        w = estimate_bope_weights(d, sample_target(p2, d, RngSpec(seed, 2)), GBTConfig(rounds=30),
                                  rng=RngSpec(seed, 3))
        finite &= bool(np.all(np.isfinite(w.weights)) and np.all(np.isfinite(w.proposed)))
    ok = worst_fd <= 1e-5 and monotone and finite
    verdict(6, "numerical soundness", ok,
            f"gradient rel err {worst_fd:.1e}, loss monotone {monotone}, all finite {finite}")
    assert ok


DISCRETE_DATASETS = ("classification n=3000 k=4 seed=1",
                     "classification n=3000 k=6 seed=2",
                     "classification n=3000 k=4 seed=3")


@pytest.mark.slow
def test_criterion_7_discrete_headline(verdict):
    wins, parts = 0, []
    for spec in DISCRETE_DATASETS:
        cfg = parse_config(f"mode = discrete\nsynthetic = {spec}\nreplications = 100\nseed = 11\n"
                           "estimators = is\n")
        rows = {r.weight_source: r for r in run_experiment(cfg).rows}
        b, i = rows["bope"], rows["ips"]
        assert b.replications_used == 100 and i.replications_used == 100
        wins += b.rmse <= i.rmse
        parts.append(f"{b.dataset} {b.rmse:.4f} vs {i.rmse:.4f}")
    ok = wins >= 2
    verdict(7, "discrete B-OPE vs IPS normalized IS", ok,
            f"B-OPE wins {wins}/3; " + "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_criterion_8_continuous_ordering(verdict):
    sources = ("oracle = P3\nn = 2000", "synthetic = regression n=2000 seed=1")
    ok, parts = True, []
    for src in sources:
        cfg = parse_config(f"mode = continuous\n{src}\nreplications = 100\nseed = 5\nestimators = is\n"
                           "propensity_model = gbt(rounds=50, depth=2)\n")
        rows = {r.weight_source: r for r in run_experiment(cfg).rows}
        b, i = rows["bope"], rows["ips"]
        ok &= b.rmse < i.rmse and b.replications_used == 100 and i.replications_used == 100
        parts.append(f"{b.dataset} {b.rmse:.4f} vs {i.rmse:.4f}")
    verdict(8, "continuous B-OPE vs GPS kernel IS", ok, "; ".join(parts))
    assert ok


def test_criterion_9_determinism(verdict, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("mode = discrete\nsynthetic = classification n=400 k=3 seed=2\nreplications = 6\n"
                   "seed = 123\nbope_model = gbt(rounds=20, depth=3)\n"
                   "propensity_model = gbt(rounds=20, depth=3)\ndm_model = gbt(rounds=20, depth=3)\n")
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2"), ("d", "4")):
        out = tmp_path / f"{name}.csv"
        assert main(["run", "--config", str(cfg), "--seed", "77", "--out", str(out), "--threads", threads]) == 0
        outs.append(out.read_bytes())
    ok = all(o == outs[0] for o in outs) and len(outs[0]) > 0
    verdict(9, "determinism", ok, "repeat run and --threads 2/4 byte-identical" if ok else "reports differ")
    assert ok
