"""Oracle bandits with known policies, density ratios and policy values,
plus synthetic supervised datasets for the benchmark harness."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import (
    CONTINUOUS,
    DISCRETE,
    LoggedDataset,
    ProposedActions,
    RngSpec,
    TabularDataset,
    make_logged_dataset,
    make_proposed,
)
from .errors import BopeError, ZeroDenominator

_ROW_TOL = 1e-12
PRESETS = ("P1", "P2", "P3")


@dataclass(frozen=True)
class DiscreteOracle:
    """Finite-state, k-action bandit with Bernoulli rewards.

    ``state_points`` is (m, p); ``pi0``, ``pi1`` and ``reward_means`` are (m, k).
    """

    name: str
    state_points: np.ndarray
    state_probs: np.ndarray
    pi0: np.ndarray
    pi1: np.ndarray
    reward_means: np.ndarray

    kind = DISCRETE

    def __post_init__(self):
        for attr in ("state_points", "state_probs", "pi0", "pi1", "reward_means"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=np.float64))
        m, k = self.pi0.shape
        if self.state_points.shape[0] != m or self.state_probs.shape != (m,):
            raise BopeError("state support and policy tables disagree in size")
        if self.pi1.shape != (m, k) or self.reward_means.shape != (m, k):
            raise BopeError("pi0, pi1 and reward_means must share shape (m, k)")
        if abs(self.state_probs.sum() - 1.0) > _ROW_TOL or np.any(self.state_probs < 0):
            raise BopeError("state probabilities must be nonnegative and sum to 1")
        for table, label in ((self.pi0, "pi0"), (self.pi1, "pi1")):
            if np.any(table < 0) or np.any(np.abs(table.sum(axis=1) - 1.0) > _ROW_TOL):
                raise BopeError(f"{label} rows must be probability vectors")
        if np.any((self.pi0 == 0) & (self.pi1 > 0)):
            raise BopeError("support violated: target puts mass where logging policy has none")
        if np.any((self.reward_means < 0) | (self.reward_means > 1)):
            raise BopeError("Bernoulli reward means must lie in [0, 1]")
        if len({tuple(r) for r in self.state_points}) != m:
            raise BopeError("state points must be distinct")

    @property
    def n_actions(self) -> int:
        return self.pi0.shape[1]

    def with_target(self, pi1) -> "DiscreteOracle":
        return replace(self, pi1=np.asarray(pi1, dtype=np.float64))

    def state_index(self, states) -> np.ndarray:
        """Map state rows back to support indices (exact match)."""
        x = np.asarray(states, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        eq = np.all(x[:, None, :] == self.state_points[None, :, :], axis=2)
        if not np.all(eq.any(axis=1)):
            raise BopeError("state row not in the oracle's support")
        return np.argmax(eq, axis=1)


@dataclass(frozen=True)
class ContinuousOracle:
    """Scalar-action bandit with Gaussian states and policies.

    s ~ N(state_mean, state_sd^2); logging a ~ N(l0 + l1 s, logging_sd^2);
    target a' ~ N(t0 + t1 s, target_sd^2) (deterministic when target_sd = 0);
    reward r(a, s) = -(a - (c0 + c1 s))^2 + N(0, reward_noise_sd^2).
    """

    name: str
    state_mean: float = 0.0
    state_sd: float = 1.0
    logging_intercept: float = 0.0
    logging_slope: float = 1.0
    logging_sd: float = 1.0
    target_intercept: float = 0.5
    target_slope: float = 1.0
    target_sd: float = 0.0
    reward_center_intercept: float = 0.0
    reward_center_slope: float = 1.0
    reward_noise_sd: float = 0.0

    kind = CONTINUOUS
    n_actions = None

    def __post_init__(self):
        if not self.logging_sd > 0:
            raise BopeError("logging policy standard deviation must be > 0")
        if self.state_sd < 0 or self.target_sd < 0 or self.reward_noise_sd < 0:
            raise BopeError("standard deviations must be >= 0")

    def logging_mean(self, s):
        return self.logging_intercept + self.logging_slope * s

    def target_mean(self, s):
        return self.target_intercept + self.target_slope * s

    def reward_mean(self, a, s):
        return -(a - (self.reward_center_intercept + self.reward_center_slope * s)) ** 2


Oracle = Union[DiscreteOracle, ContinuousOracle]


def target_is_stochastic(oracle: Oracle) -> bool:
    """True when the target policy randomizes for some state."""
    if oracle.kind == DISCRETE:
        return bool(np.any((oracle.pi1 > 0) & (oracle.pi1 < 1)))
    return oracle.target_sd > 0


def oracle_from_dict(data: dict) -> Oracle:
    kind = data.get("kind")
    if kind == DISCRETE:
        return DiscreteOracle(data["name"], data["state_points"], data["state_probs"],
                              data["pi0"], data["pi1"], data["reward_means"])
    if kind == CONTINUOUS:
        fields = {k: float(v) for k, v in data.items()
                  if k not in ("name", "kind", "version", "description")}
        return ContinuousOracle(data["name"], **fields)
    raise BopeError(f"unknown oracle kind {kind!r}")


def load_preset(name_or_path: Union[str, Path]) -> Oracle:
    """Load a shipped preset by name (P1, P2, P3) or any preset JSON file."""
    if str(name_or_path) in PRESETS:
        text = resources.files("bope.presets").joinpath(f"{name_or_path}.json").read_text("utf-8")
    else:
        text = Path(name_or_path).read_text("utf-8")
    return oracle_from_dict(json.loads(text))


def _sample_rows(gen, cdf_rows):
    u = gen.random(cdf_rows.shape[0])
    return np.minimum((u[:, None] >= cdf_rows).sum(axis=1), cdf_rows.shape[1] - 1)


def _cdf(table):
    c = np.cumsum(table, axis=1)
    c[:, -1] = 1.0
    return c


def generate_logged(oracle: Oracle, n: int, rng: RngSpec) -> LoggedDataset:
    """Draw n i.i.d. (s, a, r) triples under the logging policy."""
    if n < 1:
        raise BopeError("n must be >= 1")
    gen = rng.generator()
    if isinstance(oracle, DiscreteOracle):
        idx = _sample_rows(gen, np.cumsum(oracle.state_probs)[None, :].repeat(n, axis=0))
        a = _sample_rows(gen, _cdf(oracle.pi0)[idx]).astype(np.int64)
        r = (gen.random(n) < oracle.reward_means[idx, a]).astype(np.float64)
        return make_logged_dataset(oracle.state_points[idx], a, r, oracle.n_actions)
    s = oracle.state_mean + oracle.state_sd * gen.standard_normal(n)
    a = oracle.logging_mean(s) + oracle.logging_sd * gen.standard_normal(n)
    r = oracle.reward_mean(a, s) + oracle.reward_noise_sd * gen.standard_normal(n)
    return make_logged_dataset(s[:, None], a, r)


def sample_target(oracle: Oracle, logged: LoggedDataset, rng: RngSpec) -> ProposedActions:
    """Target-policy actions at the logged states."""
    gen = rng.generator()
    if isinstance(oracle, DiscreteOracle):
        idx = oracle.state_index(logged.states)
        return make_proposed(_sample_rows(gen, _cdf(oracle.pi1)[idx]).astype(np.int64), logged)
    s = logged.states[:, 0]
    a = oracle.target_mean(s)
    if oracle.target_sd > 0:
        a = a + oracle.target_sd * gen.standard_normal(s.shape[0])
    return make_proposed(np.asarray(a, dtype=np.float64), logged)


@dataclass(frozen=True)
class TrueValue:
    value: float
    standard_error: float = 0.0


def true_value(oracle: Oracle, quadrature_points: int = 64) -> TrueValue:
    """Exact enumeration (discrete) or Gauss-Hermite quadrature (continuous)."""
    if isinstance(oracle, DiscreteOracle):
        per_state = np.sum(oracle.pi1 * oracle.reward_means, axis=1)
        return TrueValue(float(oracle.state_probs @ per_state))
    nodes, wts = np.polynomial.hermite_e.hermegauss(quadrature_points)
    wts = wts / wts.sum()
    s = oracle.state_mean + oracle.state_sd * nodes[:, None]
    a = oracle.target_mean(s) + oracle.target_sd * nodes[None, :]
    vals = oracle.reward_mean(a, s)
    return TrueValue(float(wts @ vals @ wts))


def true_value_mc(oracle: Oracle, draws: int, rng: RngSpec) -> TrueValue:
    """Monte Carlo value of the target policy with its standard error."""
    gen = rng.generator()
    if isinstance(oracle, DiscreteOracle):
        idx = _sample_rows(gen, np.cumsum(oracle.state_probs)[None, :].repeat(draws, axis=0))
        a = _sample_rows(gen, _cdf(oracle.pi1)[idx])
        r = (gen.random(draws) < oracle.reward_means[idx, a]).astype(np.float64)
    else:
        s = oracle.state_mean + oracle.state_sd * gen.standard_normal(draws)
        a = oracle.target_mean(s) + oracle.target_sd * gen.standard_normal(draws)
        r = oracle.reward_mean(a, s) + oracle.reward_noise_sd * gen.standard_normal(draws)
    return TrueValue(float(r.mean()), float(r.std(ddof=1) / math.sqrt(draws)))


def _normal_pdf(x, mean, sd):
    return np.exp(-0.5 * ((x - mean) / sd) ** 2) / (sd * math.sqrt(2.0 * math.pi))


def true_ratio(oracle: Oracle, actions, states):
    """pi1(a|s) / pi0(a|s); the shared state marginal cancels."""
    a = np.asarray(actions)
    if isinstance(oracle, DiscreteOracle):
        idx = oracle.state_index(states)
        a = a.astype(np.int64)
        num = oracle.pi1[idx, a]
        den = oracle.pi0[idx, a]
    else:
        if oracle.target_sd == 0:
            raise ZeroDenominator("a deterministic continuous target has no density ratio")
        s = np.asarray(states, dtype=np.float64).reshape(a.shape[0], -1)[:, 0]
        num = _normal_pdf(a, oracle.target_mean(s), oracle.target_sd)
        den = _normal_pdf(a, oracle.logging_mean(s), oracle.logging_sd)
    if np.any(den == 0):
        raise ZeroDenominator("logging policy has zero probability at a queried pair")
    out = num / den
    return float(out) if np.ndim(out) == 0 else out


def make_classification_data(n: int, k: int, p: int = 6, separation: float = 1.5,
                             seed: int = 0, name: Optional[str] = None) -> TabularDataset:
    """Gaussian class clusters in p dimensions with overlapping classes."""
    gen = RngSpec(seed, 7001).generator()
    centers = separation * gen.standard_normal((k, p))
    y = gen.integers(0, k, size=n)
    x = centers[y] + gen.standard_normal((n, p))
    return TabularDataset(x, y.astype(np.int64), name or f"synth-k{k}-n{n}-s{seed}", k)


def make_regression_data(n: int, p: int = 5, noise: float = 0.3, seed: int = 0,
                         name: Optional[str] = None) -> TabularDataset:
    """Smooth nonlinear target with additive Gaussian noise."""
    gen = RngSpec(seed, 7002).generator()
    x = gen.uniform(-1.0, 1.0, size=(n, p))
    coef = gen.normal(size=p)
    y = np.sin(2.0 * x[:, 0]) + x @ coef / math.sqrt(p) + 0.5 * x[:, 1] ** 2
    y = y + noise * gen.standard_normal(n)
    return TabularDataset(x, y, name or f"synth-reg-n{n}-s{seed}", None)
