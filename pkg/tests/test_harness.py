import json
import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from bope.classify import GBTConfig
from bope.core import TabularDataset, RngSpec
from bope.errors import ConfigError, ParseError, SingleClass, TooFewRows
from bope.harness import (
    REPORT_COLUMNS,
    classification_to_bandit,
    config_hash,
    filter_rare_classes,
    format_config,
    format_report,
    load_csv,
    parse_config,
    regression_to_bandit,
    run_experiment,
    summarize,
)
from bope.harness.data import BanditProblem
from bope.synthetic import make_classification_data, make_regression_data
from conftest import binomial_interval

TINY = GBTConfig(rounds=5, depth=2)
QUICK = """
mode = discrete
synthetic = classification n=200 k=3 seed=4
replications = 3
seed = 9
n = 2000
target_model = gbt(rounds=5, depth=2)
dm_model = gbt(rounds=10, depth=2)
propensity_model = gbt(rounds=10, depth=2)
bope_model = gbt(rounds=10, depth=2)
"""


def test_load_csv_reindexes_labels(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x1,x2,y\n1,2,a\n3,4,b\n5,6,a\n7,8,b\n")
    data = load_csv(path, "y", "discrete")
    assert data.n_classes == 2
    assert data.label.tolist() == [0, 1, 0, 1]
    assert data.features.tolist() == [[1, 2], [3, 4], [5, 6], [7, 8]]


def test_load_csv_numeric_label_order(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("x,y\n0,10\n1,9\n2,10\n")
    assert load_csv(path, "y", "discrete").label.tolist() == [1, 0, 1]


def test_load_csv_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "missing.csv", "y", "discrete")
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2,y\n1,2,a\n3,abc,b\n")
    with pytest.raises(ParseError) as info:
        load_csv(bad, "y", "discrete")
    assert info.value.col == "x2" and info.value.row == 3
    one = tmp_path / "one.csv"
    one.write_text("x,y\n1,a\n2,a\n")
    with pytest.raises(SingleClass):
        load_csv(one, "y", "discrete")
    reg = tmp_path / "reg.csv"
    reg.write_text("x,y\n1,0.5\n2,zz\n")
    with pytest.raises(ParseError):
        load_csv(reg, "y", "continuous")


def test_rare_classes_removed():
    data = TabularDataset(np.arange(23.0)[:, None], np.array([0] * 10 + [1] * 3 + [2] * 10), "t", 3)
    kept = filter_rare_classes(data, 10)
    assert kept.n_classes == 2 and kept.n == 20
    assert kept.label.tolist() == [0] * 10 + [1] * 10


def test_uniform_logging_reward_rate():
    data = make_classification_data(40000, 4, seed=3)
    bandit = classification_to_bandit(data, TINY, RngSpec(1))
    _, test = bandit.draw(RngSpec(2))
    assert test.n == 20000
    lo, hi = binomial_interval(20000, 0.25)
    assert 0.22 <= lo and hi <= 0.28
    assert 0.22 <= test.rewards.mean() <= 0.28


def test_perfect_classifier_truth_is_one():
    gen = np.random.default_rng(0)
    y = gen.integers(0, 3, 300)
    x = np.column_stack([y + 0.01 * gen.normal(size=300), gen.normal(size=300)])
    bandit = classification_to_bandit(TabularDataset(x, y, "sep", 3), TINY, RngSpec(0))
    assert bandit.truth == 1.0


def test_bandit_draw_deterministic():
    bandit = classification_to_bandit(make_classification_data(400, 3, seed=1), TINY, RngSpec(5))
    a, b = bandit.draw(RngSpec(8)), bandit.draw(RngSpec(8))
    assert np.array_equal(a[1].actions, b[1].actions)
    assert np.array_equal(a[0].rewards, b[0].rewards)


def test_classification_too_few_rows():
    data = TabularDataset(np.zeros((7, 1)), np.array([0, 1, 0, 1, 0, 1, 0]), "t", 2)
    with pytest.raises(TooFewRows):
        classification_to_bandit(data, TINY, RngSpec(0))


def test_regression_rewards():
    x = np.zeros((2, 1))
    y = np.array([1.0, 2.0])
    b = BanditProblem("r", "continuous", None, x, y, x, y, y, y, 0.0)
    assert b._reward(y, y).tolist() == [0.0, 0.0]
    assert b._reward(y + 1, y).tolist() == [-1.0, -1.0]


def test_regression_logged_marginal_matches_train_labels():
    bandit = regression_to_bandit(make_regression_data(20000, seed=2), TINY, RngSpec(3))
    _, test = bandit.draw(RngSpec(4))
    assert test.n == 10000
    assert ks_2samp(test.actions, bandit.y_train).statistic < 0.02
    assert bandit.truth == pytest.approx(-np.mean(np.abs(bandit.proposed_test - bandit.y_test)), rel=1e-15)


def test_summarize_examples():
    assert summarize([1, 1, 1], 1.0) == (0.0, 0.0, 0.0)
    bias, rmse, se = summarize([0, 2], 1.0)
    assert bias == 0.0 and rmse == 1.0 and se == 0.0
    bias, rmse, se = summarize([1.1], 1.0)
    assert bias == pytest.approx(0.1, abs=1e-15) and rmse == pytest.approx(0.1, abs=1e-15) and se == 0.0
    with pytest.raises(Exception):
        summarize([], 0.0)


def test_summarize_delta_method_se():
    est = np.array([0.0, 1.0, 3.0])
    sq = est ** 2
    rmse = math.sqrt(sq.mean())
    assert summarize(est, 0.0)[2] == pytest.approx(np.std(sq, ddof=1) / math.sqrt(3) / (2 * rmse), rel=1e-14)


def test_config_round_trip_and_errors():
    cfg = parse_config(QUICK)
    assert parse_config(format_config(cfg)) == cfg
    assert config_hash(cfg) == config_hash(parse_config(format_config(cfg)))
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(QUICK + "colour = blue\n")
    with pytest.raises(ConfigError):
        parse_config(QUICK + "seed = 3\n")
    with pytest.raises(ConfigError):
        parse_config(QUICK.replace("replications = 3", "replications = 0"))
    with pytest.raises(ConfigError):
        parse_config(QUICK.replace("estimators", "x") + "estimators = is, magic\n")


def test_single_replication_rmse_is_abs_bias():
    res = run_experiment(parse_config(QUICK.replace("replications = 3", "replications = 1")))
    for row in res.rows:
        assert row.replications_used == 1
        assert row.rmse == abs(row.bias)


def test_report_files_byte_identical(tmp_path):
    cfg = parse_config(QUICK)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    ra = run_experiment(cfg, out=str(a))
    run_experiment(cfg, out=str(b))
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.replications.csv").read_bytes() == (tmp_path / "b.replications.csv").read_bytes()
    text = a.read_text().splitlines()
    assert tuple(text[0].split(",")) == REPORT_COLUMNS
    assert len(text) == 1 + 1 + 4 * 2
    meta = json.loads((tmp_path / "a.meta.json").read_text())
    assert meta["seed"] == 9 and meta["config_hash"] == config_hash(cfg)
    assert set(meta["versions"]) >= {"bope", "numpy", "python"}
    for row in ra.rows:
        assert row.rmse ** 2 >= row.bias ** 2 - 3 * row.rmse_se
    assert format_report(ra.rows) == a.read_text()


def test_six_significant_digits():
    from bope.harness.experiment import ReportRow
    row = ReportRow("d", "is", "bope", 1 / 3, 2 / 3, 1e-7 / 3, math.nan, 12345678.9, 7)
    line = format_report([row]).splitlines()[1]
    assert line == "d,is,bope,0.333333,0.666667,3.33333e-08,nan,1.23457e+07,7"


def test_oracle_mode_stochastic_target_uses_ratio_only():
    cfg = parse_config("mode = discrete\noracle = P2\nn = 500\nreplications = 2\nseed = 1\n"
                       "estimators = is\nbope_model = gbt(rounds=20, depth=3)\n"
                       "propensity_model = gbt(rounds=20, depth=3)\n")
    res = run_experiment(cfg)
    assert {r.weight_source for r in res.rows} == {"ips", "bope"}
    assert all(math.isfinite(r.rmse) for r in res.rows)


def test_shipped_configs_parse():
    from pathlib import Path
    from bope.harness import load_config
    paths = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))
    assert paths
    for path in paths:
        load_config(path)
