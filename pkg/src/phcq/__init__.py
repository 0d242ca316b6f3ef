"""Probabilistic hill-climbing exploration for robust Q-learning."""

from .harness import ExperimentConfig, RunRecord, compare_strategies, run_experiment
from .phc import PhcConfig, phc_explore
from .policy import Policy, TransformSet
from .selection import SelectionConfig, select_best

__all__ = [
    "ExperimentConfig",
    "PhcConfig",
    "Policy",
    "RunRecord",
    "SelectionConfig",
    "TransformSet",
    "compare_strategies",
    "phc_explore",
    "run_experiment",
    "select_best",
]
__version__ = "0.1.0"
