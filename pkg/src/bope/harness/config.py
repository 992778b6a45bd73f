"""Experiment configuration and its ``key = value`` text format.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Unknown keys are errors. Lists are comma separated. Model settings use
``family(param=value, ...)`` with families ``gbt``, ``linear`` and
``constant``; ``rounds=auto`` applies the sample-size rule (ceil(20 sqrt n)
for fitted nuisance models, floor(10 n^(1/4)) for the target policy).

Example::

    mode = discrete
    synthetic = classification n=3000 k=4 p=6 seed=1
    replications = 100
    seed = 7
    bope_model = gbt(rounds=auto, depth=6)
    estimators = dm, is, dr, switch, switch-dr
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, fields
from typing import Optional

from ..classify import ConstantConfig, GBTConfig, LinearConfig, boosting_rounds_for, ensemble_size_for
from ..errors import BopeError, ConfigError
from ..kernels import KERNELS

ESTIMATORS = ("dm", "is", "dr", "switch", "switch-dr")
WEIGHT_FITTING = ("train_split", "cross_fit")
_MODEL_RE = re.compile(r"^\s*(\w+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class ModelSpec:
    """Unresolved model setting; ``rounds`` may be ``"auto"``."""

    family: str
    params: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        m = _MODEL_RE.match(text)
        if not m or m.group(1) not in ("gbt", "linear", "constant"):
            raise ConfigError(f"bad model setting {text!r}")
        params = []
        body = (m.group(2) or "").strip()
        if body:
            for item in body.split(","):
                if "=" not in item:
                    raise ConfigError(f"bad model parameter {item.strip()!r} in {text!r}")
                k, v = (s.strip() for s in item.split("=", 1))
                params.append((k, v))
        spec = cls(m.group(1), tuple(params))
        spec.resolve(100, "boost")  # validate eagerly
        return spec

    def resolve(self, n: int, rule: str):
        kw = {}
        for k, v in self.params:
            if k == "rounds" and v == "auto":
                kw[k] = ensemble_size_for(n) if rule == "ensemble" else boosting_rounds_for(n)
            elif k in ("rounds", "depth", "min_leaf", "max_iters"):
                kw[k] = _as_int(v, k)
            else:
                kw[k] = _as_float(v, k)
        try:
            if self.family == "gbt":
                kw.setdefault("rounds", ensemble_size_for(n) if rule == "ensemble" else boosting_rounds_for(n))
                return GBTConfig(**kw)
            if self.family == "linear":
                return LinearConfig(**kw)
            if kw:
                raise ConfigError("constant model takes no parameters")
            return ConstantConfig()
        except TypeError as exc:
            raise ConfigError(f"bad parameter for {self.family}: {exc}") from None
        except BopeError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def __str__(self):
        if not self.params:
            return self.family
        return f"{self.family}(" + ", ".join(f"{k}={v}" for k, v in self.params) + ")"


def _as_int(v, key):
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None


def _as_float(v, key):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _default_model():
    return ModelSpec("gbt", (("rounds", "auto"),))


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "discrete"
    dataset: Optional[str] = None
    label_column: Optional[str] = None
    oracle: Optional[str] = None
    synthetic: Optional[str] = None
    n: int = 2000
    n_train: Optional[int] = None
    replications: int = 100
    seed: int = 0
    target_model: ModelSpec = field(default_factory=_default_model)
    dm_model: ModelSpec = field(default_factory=_default_model)
    propensity_model: ModelSpec = field(default_factory=_default_model)
    bope_model: ModelSpec = field(default_factory=_default_model)
    weight_fitting: str = "train_split"
    clip_epsilon: float = 1e-3
    density_floor: float = 1e-6
    folds: int = 5
    kernel: str = "gaussian"
    bandwidth_c: float = 1.0
    switch_quantiles: tuple = (0.5, 0.8, 0.9, 0.95, 0.99, math.inf)
    estimators: tuple = ESTIMATORS
    min_class_count: int = 10
    output: Optional[str] = None

    def __post_init__(self):
        if self.mode not in ("discrete", "continuous"):
            raise ConfigError(f"mode must be discrete or continuous, got {self.mode!r}")
        sources = [s for s in (self.dataset, self.oracle, self.synthetic) if s]
        if len(sources) != 1:
            raise ConfigError("exactly one of dataset, oracle, synthetic must be set")
        if self.dataset and not self.label_column:
            raise ConfigError("dataset needs label_column")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.n < 2 or (self.n_train is not None and self.n_train < 2):
            raise ConfigError("n and n_train must be >= 2")
        if self.weight_fitting not in WEIGHT_FITTING:
            raise ConfigError(f"weight_fitting must be one of {WEIGHT_FITTING}")
        if not 0 < self.clip_epsilon < 0.5:
            raise ConfigError("clip_epsilon must lie in (0, 0.5)")
        if not self.density_floor > 0:
            raise ConfigError("density_floor must be > 0")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}")
        if not self.bandwidth_c > 0:
            raise ConfigError("bandwidth_c must be > 0")
        for q in self.switch_quantiles:
            if not (math.isinf(q) and q > 0) and not 0 < q <= 1:
                raise ConfigError(f"switch quantile {q} outside (0, 1] and not inf")
        if not self.switch_quantiles:
            raise ConfigError("switch_quantiles must not be empty")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        if self.min_class_count < 1:
            raise ConfigError("min_class_count must be >= 1")


_INT = {"n", "n_train", "replications", "seed", "folds", "min_class_count"}
_FLOAT = {"clip_epsilon", "density_floor", "bandwidth_c"}
_MODEL = {"target_model", "dm_model", "propensity_model", "bope_model"}
_KEYS = {f.name for f in fields(ExperimentConfig)}


def _parse_value(key, raw):
    if key in _INT:
        return _as_int(raw, key)
    if key in _FLOAT:
        return _as_float(raw, key)
    if key in _MODEL:
        return ModelSpec.parse(raw)
    if key == "switch_quantiles":
        return tuple(_as_float(v.strip(), key) for v in raw.split(",") if v.strip())
    if key == "estimators":
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return raw


def parse_config(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, **overrides)


def _fmt(v):
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical text form (every field, fixed order); round-trips through parse_config."""
    lines = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    canon = format_config(cfg.__class__(**{**cfg.__dict__, "output": None}))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
