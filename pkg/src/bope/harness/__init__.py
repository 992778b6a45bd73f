"""Benchmark harness: data ingestion, bandit construction, replication runs and reports."""
from .config import ExperimentConfig, ModelSpec, config_hash, format_config, load_config, parse_config
from .data import (
    BanditProblem,
    classification_to_bandit,
    filter_rare_classes,
    load_csv,
    regression_to_bandit,
    split_half,
)
from .experiment import (
    REPORT_COLUMNS,
    ExperimentResult,
    OracleSource,
    ReportRow,
    aggregate,
    build_source,
    format_report,
    run_experiment,
    run_replication,
    summarize,
)

__all__ = [
    "BanditProblem", "ExperimentConfig", "ExperimentResult", "ModelSpec", "OracleSource",
    "REPORT_COLUMNS", "ReportRow", "aggregate", "build_source", "classification_to_bandit",
    "config_hash", "filter_rare_classes", "format_config", "format_report", "load_config",
    "load_csv", "parse_config", "regression_to_bandit", "run_experiment", "run_replication",
    "split_half", "summarize",
]
