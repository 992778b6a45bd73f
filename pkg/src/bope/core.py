"""Dataset containers, policies and the seeded randomness contract."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    LengthMismatch,
    MixedActionVariant,
    NonFiniteValue,
    VariantMismatch,
)

DISCRETE = "discrete"
CONTINUOUS = "continuous"


class Discrete(NamedTuple):
    index: int


class Continuous(NamedTuple):
    value: float


@dataclass(frozen=True)
class RngSpec:
    """Seed plus stream id for a PCG64 generator.

    Streams are derived through ``numpy.random.SeedSequence`` with the stream id
    as spawn key, so ``RngSpec(s, i)`` and ``RngSpec(s, j)`` are independent
    substreams for ``i != j`` and identical specs give identical sequences on
    every platform numpy supports.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, key: int) -> "RngSpec":
        """Derive a substream keyed by ``key`` (e.g. a replication or fold index)."""
        mixed = np.random.SeedSequence([int(self.stream), int(key)]).generate_state(1, np.uint64)[0]
        return RngSpec(self.seed, int(mixed))


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def as_state_matrix(states) -> np.ndarray:
    """Validate and copy a state matrix; a 1-D input becomes a single column."""
    x = np.array(states, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise DimensionMismatch(f"states must be an (n>=1, p>=1) matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("states contain NaN or infinite entries")
    return x


def as_actions(actions, n_actions: Optional[int] = None) -> tuple[np.ndarray, str]:
    """Convert actions to a numpy array and infer their variant.

    Accepts a sequence of :class:`Discrete` / :class:`Continuous` values or a
    plain array (integer dtype means discrete, float means continuous).
    """
    if isinstance(actions, np.ndarray):
        arr = actions
    else:
        items = list(actions)
        kinds = {type(a) for a in items}
        if kinds & {Discrete, Continuous}:
            if len(kinds) > 1:
                raise MixedActionVariant("actions mix Discrete and Continuous variants")
            if Discrete in kinds:
                arr = np.array([a.index for a in items], dtype=np.int64)
            else:
                arr = np.array([a.value for a in items], dtype=np.float64)
        else:
            arr = np.asarray(items)
    if arr.ndim != 1:
        raise DimensionMismatch("actions must be one-dimensional (scalar actions only)")
    if np.issubdtype(arr.dtype, np.integer) or np.issubdtype(arr.dtype, np.bool_):
        arr = arr.astype(np.int64)
        if arr.size and arr.min() < 0:
            raise DimensionMismatch("discrete action indices must be non-negative")
        if n_actions is not None and arr.size and arr.max() >= n_actions:
            raise DimensionMismatch(f"discrete action index {arr.max()} >= k={n_actions}")
        return arr, DISCRETE
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("continuous actions contain NaN or infinite values")
    return arr, CONTINUOUS


@dataclass(frozen=True)
class LoggedDataset:
    """States, logged actions and rewards collected under the logging policy."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    kind: str
    n_actions: Optional[int] = None

    @property
    def n(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True)
class ProposedActions:
    """Actions the target policy takes at the logged states."""

    actions: np.ndarray
    kind: str

    def __len__(self):
        return self.actions.shape[0]


def make_logged_dataset(states, actions, rewards, n_actions: Optional[int] = None) -> LoggedDataset:
    x = as_state_matrix(states)
    a, kind = as_actions(actions, n_actions)
    r = np.array(rewards, dtype=np.float64).ravel()
    if not (x.shape[0] == a.shape[0] == r.shape[0]):
        raise LengthMismatch(
            f"states ({x.shape[0]}), actions ({a.shape[0]}) and rewards ({r.shape[0]}) differ in length"
        )
    if not np.all(np.isfinite(r)):
        raise NonFiniteValue("rewards contain NaN or infinite values")
    if kind == DISCRETE and n_actions is None:
        n_actions = int(a.max()) + 1
    if kind == CONTINUOUS:
        n_actions = None
    return LoggedDataset(_readonly(x), _readonly(a), _readonly(r), kind, n_actions)


def make_proposed(actions, logged: LoggedDataset) -> ProposedActions:
    a, kind = as_actions(actions, logged.n_actions if logged.kind == DISCRETE else None)
    if kind != logged.kind:
        raise VariantMismatch(f"proposed actions are {kind} but logged actions are {logged.kind}")
    if a.shape[0] != logged.n:
        raise LengthMismatch(f"{a.shape[0]} proposed actions for {logged.n} logged units")
    return ProposedActions(_readonly(a), kind)


@dataclass(frozen=True)
class DeterministicPolicy:
    """Policy given by a pure function ``predict(states) -> actions``."""

    predict: Callable[[np.ndarray], Sequence]
    kind: str = DISCRETE
    n_actions: Optional[int] = None


@dataclass(frozen=True)
class StochasticPolicy:
    """Policy given by ``sample(states, generator) -> actions``.

    The sampler must draw only from the generator it is handed; that is what
    makes it reproducible from an :class:`RngSpec`.
    """

    sample: Callable[[np.ndarray, np.random.Generator], Sequence]
    kind: str = DISCRETE
    n_actions: Optional[int] = None


def uniform_policy(k: int) -> StochasticPolicy:
    def sample(states, gen):
        return gen.integers(0, k, size=states.shape[0])

    return StochasticPolicy(sample, DISCRETE, k)


def tabular_policy(probs: np.ndarray, state_index: Callable[[np.ndarray], np.ndarray]) -> StochasticPolicy:
    """Stochastic discrete policy from an (m, k) probability table.

    ``state_index`` maps a state matrix to row indices of the table.
    """
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0

    def sample(states, gen):
        rows = cdf[state_index(states)]
        u = gen.random(states.shape[0])
        return (u[:, None] >= rows).sum(axis=1).astype(np.int64)

    return StochasticPolicy(sample, DISCRETE, probs.shape[1])


def sample_policy_actions(policy, states, rng: Optional[RngSpec] = None) -> np.ndarray:
    x = as_state_matrix(states)
    if isinstance(policy, DeterministicPolicy):
        out = policy.predict(x)
    elif isinstance(policy, StochasticPolicy):
        if rng is None:
            raise TypeError("a stochastic policy needs an RngSpec")
        out = policy.sample(x, rng.generator())
    else:
        raise TypeError(f"unsupported policy type {type(policy).__name__}")
    a, kind = as_actions(out if isinstance(out, np.ndarray) else list(out), policy.n_actions)
    if kind != policy.kind:
        raise VariantMismatch(f"policy declared {policy.kind} but produced {kind} actions")
    if a.shape[0] != x.shape[0]:
        raise LengthMismatch("policy returned the wrong number of actions")
    return a


@dataclass(frozen=True)
class TabularDataset:
    """Supervised dataset used to build bandit problems.

    ``label`` holds dense class indices ``0..k-1`` (``n_classes`` set) or real
    targets (``n_classes`` is None).
    """

    features: np.ndarray
    label: np.ndarray
    name: str
    n_classes: Optional[int] = None

    @property
    def n(self) -> int:
        return self.features.shape[0]
