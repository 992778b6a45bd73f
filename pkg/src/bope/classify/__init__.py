"""Probabilistic classifiers and regressors trained with log-loss / squared error."""
from ._backend import BACKEND
from .config import (
    ClassifierConfig,
    ConstantConfig,
    GBTConfig,
    LinearConfig,
    boosting_rounds_for,
    ensemble_size_for,
)
from .linear import logistic_objective
from .models import (
    PROBA_CLAMP,
    MulticlassClassifier,
    ProbabilisticClassifier,
    Regressor,
    constant_classifier,
    cross_validated_loss,
    dump_model,
    load_model,
    log_loss,
    model_from_dict,
    predict_proba,
    train_classifier,
    train_multiclass,
    train_regressor,
)

__all__ = [
    "BACKEND", "ClassifierConfig", "ConstantConfig", "GBTConfig", "LinearConfig",
    "boosting_rounds_for", "ensemble_size_for", "logistic_objective", "PROBA_CLAMP",
    "MulticlassClassifier", "ProbabilisticClassifier", "Regressor", "constant_classifier",
    "cross_validated_loss", "dump_model", "load_model", "log_loss", "model_from_dict",
    "predict_proba", "train_classifier", "train_multiclass", "train_regressor",
]
