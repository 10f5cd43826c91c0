"""Online dictionary learning with neurogenesis-style birth and death of elements."""

from .harness import ExperimentConfig, run_experiment, verify_lemma1
from .learner import LearnerConfig, LearnerState, Variant, process_batch
from .numerics import SparsityTarget

__all__ = [
    "ExperimentConfig",
    "LearnerConfig",
    "LearnerState",
    "SparsityTarget",
    "Variant",
    "process_batch",
    "run_experiment",
    "verify_lemma1",
]
