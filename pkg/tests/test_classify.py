import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import expit

from bope.classify import (
    PROBA_CLAMP,
    ConstantConfig,
    GBTConfig,
    LinearConfig,
    ProbabilisticClassifier,
    boosting_rounds_for,
    constant_classifier,
    cross_validated_loss,
    dump_model,
    ensemble_size_for,
    load_model,
    logistic_objective,
    predict_proba,
    train_classifier,
    train_multiclass,
    train_regressor,
)
from bope.core import RngSpec
from bope.errors import (
    DimensionMismatch,
    FoldTooSmall,
    LengthMismatch,
    NonConvergence,
    NonFiniteValue,
    SingleClass,
)


def walk_ensemble(model, x):
    """Independent tree walk over the JSON dump (no compiled code)."""
    doc = model.to_dict()
    out = []
    for row in x:
        total = doc["base_score"]
        for tree in doc["trees"]:
            node = 0
            while tree["feature"][node] >= 0:
                f = tree["feature"][node]
                node = tree["left"][node] if row[f] <= tree["threshold"][node] else tree["right"][node]
            total += tree["value"][node]
        out.append(total)
    return np.array(out)


def test_logistic_two_points_matches_closed_form():
    x = np.array([[-1.0], [1.0]])
    y = np.array([0.0, 1.0])
    l2 = 0.01
    # by symmetry the intercept is 0 and the slope solves sigma(-w) = l2 * w
    w_star = brentq(lambda w: expit(-w) - l2 * w, 0.0, 100.0, xtol=1e-14)
    model = train_classifier(x, y, LinearConfig(l2=l2, tol=1e-12))
    assert model.beta[0] == pytest.approx(0.0, abs=1e-9)
    assert model.beta[1] == pytest.approx(w_star, rel=1e-8)
    p = model.predict_proba(x)
    assert p[1] > 0.95 and p[0] < 0.05


def test_uninformative_labels_give_half():
    gen = RngSpec(3).generator()
    x = gen.normal(size=(5000, 3))
    y = np.tile([0.0, 1.0], 2500)
    gen.shuffle(y)
    p = train_classifier(x, y, LinearConfig()).predict_proba(x)
    assert np.all(np.abs(p - 0.5) <= 0.05)


def test_gbt_xor_brute_force():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 5)
    y = np.logical_xor(x[:, 0], x[:, 1]).astype(float)
    model = train_classifier(x, y, GBTConfig(rounds=50, depth=2))
    raw = walk_ensemble(model, x)
    assert np.allclose(raw, model.raw_score(x), rtol=0, atol=1e-12)
    assert np.mean((raw > 0) == (y == 1)) == 1.0


def test_predict_proba_identities():
    assert np.allclose(constant_classifier(0.3, 2).predict_proba(np.zeros((4, 2))), 0.3, atol=1e-15)
    inf_model = ProbabilisticClassifier("constant", 1, constant=np.inf)
    assert predict_proba(inf_model, np.zeros((1, 1)))[0] == 1 - PROBA_CLAMP
    zero = ProbabilisticClassifier("linear", 2, beta=np.zeros(3))
    assert np.all(zero.predict_proba(np.ones((3, 2))) == 0.5)
    with pytest.raises(DimensionMismatch):
        zero.predict_proba(np.ones((3, 5)))


def test_classifier_errors():
    with pytest.raises(SingleClass):
        train_classifier(np.zeros((3, 1)), [1, 1, 1], LinearConfig())
    with pytest.raises(LengthMismatch):
        train_classifier(np.zeros((3, 1)), [0, 1], LinearConfig())


def test_nonconvergence_reports_gradient():
    gen = RngSpec(5).generator()
    x = gen.normal(size=(200, 4))
    y = (x[:, 0] + gen.normal(size=200) > 0).astype(float)
    with pytest.raises(NonConvergence) as info:
        train_classifier(x, y, LinearConfig(max_iters=1, tol=1e-14))
    assert info.value.grad_norm > 0


def test_regressor_constant_targets():
    x = RngSpec(1).generator().normal(size=(50, 2))
    for cfg in (LinearConfig(), GBTConfig(rounds=10), ConstantConfig()):
        pred = train_regressor(x, np.full(50, 2.5), cfg).predict(x)
        assert np.allclose(pred, 2.5, atol=1e-12)


def test_regressor_linear_matches_normal_equations():
    gen = RngSpec(2).generator()
    x = gen.normal(size=(100, 3))
    y = 1.5 + x @ np.array([2.0, -1.0, 0.5])
    d = np.hstack([np.ones((100, 1)), x])
    beta = np.linalg.solve(d.T @ d, d.T @ y)
    model = train_regressor(x, y, LinearConfig(l2=0.0))
    assert np.allclose(model.beta, beta, atol=1e-9)
    assert np.max(np.abs(model.predict(x) - y)) <= 1e-6


def test_gbt_regression_square():
    x = np.linspace(-1, 1, 500)[:, None]
    y = x[:, 0] ** 2
    model = train_regressor(x, y, GBTConfig(rounds=200, depth=3))
    assert math.sqrt(np.mean((model.predict(x) - y) ** 2)) < 0.05


def test_regressor_errors():
    with pytest.raises(NonFiniteValue):
        train_regressor(np.zeros((2, 1)), [np.nan, 1.0], LinearConfig())
    with pytest.raises(LengthMismatch):
        train_regressor(np.zeros((2, 1)), [1.0], LinearConfig())


def test_cv_constant_half_is_ln2():
    x = np.arange(100.0)[:, None]
    y = np.tile([0.0, 1.0], 50)
    assert cross_validated_loss(ConstantConfig(), x, y, 5, RngSpec(0)) == pytest.approx(math.log(2), abs=1e-12)


def test_cv_separable_flexible_model():
    x = np.linspace(-1, 1, 200)[:, None]
    y = (x[:, 0] > 0).astype(float)
    assert cross_validated_loss(GBTConfig(rounds=50, depth=2), x, y, 5, RngSpec(0)) < 0.1


def test_cv_errors():
    x = np.arange(10.0)[:, None]
    y = np.tile([0.0, 1.0], 5)
    with pytest.raises(FoldTooSmall):
        cross_validated_loss(ConstantConfig(), x, y, 1, RngSpec(0))
    with pytest.raises(SingleClass):
        cross_validated_loss(ConstantConfig(), x, np.zeros(10), 2, RngSpec(0))


def test_cv_fold_assignment_deterministic():
    gen = RngSpec(8).generator()
    x = gen.normal(size=(60, 2))
    y = (x[:, 0] > 0).astype(float)
    a = cross_validated_loss(LinearConfig(), x, y, 3, RngSpec(4))
    b = cross_validated_loss(LinearConfig(), x, y, 3, RngSpec(4))
    assert a == b


def test_logistic_gradient_finite_differences():
    gen = RngSpec(11).generator()
    x = gen.normal(size=(40, 3))
    y = (gen.random(40) < 0.4).astype(float)
    h = 1e-6
    for _ in range(20):
        beta = gen.normal(size=4)
        _, grad = logistic_objective(beta, x, y, 0.1)
        fd = np.empty(4)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd[j] = (logistic_objective(beta + e, x, y, 0.1)[0] - logistic_objective(beta - e, x, y, 0.1)[0]) / (2 * h)
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) <= 1e-5


@pytest.mark.parametrize("loss_labels", ["log", "squared"])
def test_gbt_loss_history_monotone(loss_labels):
    gen = RngSpec(13).generator()
    x = gen.normal(size=(300, 4))
    if loss_labels == "log":
        y = (x[:, 0] * x[:, 1] + 0.5 * gen.normal(size=300) > 0).astype(float)
        model = train_classifier(x, y, GBTConfig(rounds=80, depth=4, learning_rate=1.0))
    else:
        y = np.sin(3 * x[:, 0]) + 0.3 * gen.normal(size=300)
        model = train_regressor(x, y, GBTConfig(rounds=80, depth=4, learning_rate=1.0))
    hist = np.array(model.loss_history)
    assert hist.shape[0] == 81
    assert np.all(np.diff(hist) <= 0)


def test_proper_loss_regret_decreases_with_n():
    # two unit-variance Gaussians at -1 and +1: p(C=1|x) = expit(2x)
    wins = 0
    for seed in range(50):
        gen = RngSpec(seed, 77).generator()
        errs = []
        for n in (500, 20000):
            y = (gen.random(n) < 0.5).astype(float)
            x = (2 * y - 1 + gen.normal(size=n))[:, None]
            p = train_classifier(x, y, LinearConfig()).predict_proba(x)
            errs.append(np.mean(np.abs(p - expit(2 * x[:, 0]))))
        wins += errs[1] < errs[0]
    assert wins >= 45


def test_dump_load_roundtrip(tmp_path):
    gen = RngSpec(21).generator()
    x = gen.normal(size=(80, 3))
    y = (x[:, 0] > 0).astype(float)
    for model in (train_classifier(x, y, GBTConfig(rounds=5, depth=3)),
                  train_classifier(x, y, LinearConfig()),
                  train_regressor(x, x[:, 1], GBTConfig(rounds=5)),
                  constant_classifier(0.2, 3)):
        path = tmp_path / "m.json"
        dump_model(model, path)
        back = load_model(path)
        assert type(back) is type(model)
        assert np.array_equal(back.raw_score(x), model.raw_score(x))


def test_multiclass_probabilities_sum_to_one():
    gen = RngSpec(31).generator()
    x = gen.normal(size=(200, 2))
    y = (x[:, 0] > 0).astype(int) + (x[:, 1] > 0).astype(int)
    model = train_multiclass(x, y, 3, GBTConfig(rounds=10, depth=2))
    p = model.predict_proba(x)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.mean(model.predict(x) == y) > 0.9


def test_sizing_rules():
    assert boosting_rounds_for(100) == 200
    assert boosting_rounds_for(1500) == math.ceil(20 * math.sqrt(1500))
    assert ensemble_size_for(10000) == 100
    assert ensemble_size_for(16) == 20
