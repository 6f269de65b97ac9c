"""Accuracy experiments and the local-collision baseline."""

from .bkr import bkr_statistic
from .harness import CSV_COLUMNS, ExperimentConfig, ExperimentRow, Instance, TesterKind, experiment_accuracy

__all__ = [
    "bkr_statistic",
    "ExperimentConfig",
    "ExperimentRow",
    "Instance",
    "TesterKind",
    "experiment_accuracy",
    "CSV_COLUMNS",
]
