# sequential/__init__.py
"""
Sequential allocation simulator with censored feedback.
"""

from .simulator import (
    SequentialConfig,
    SequentialResult,
    StepLog,
    run_sequential,
    training_seed,
)

__all__ = [
    "SequentialConfig",
    "SequentialResult",
    "StepLog",
    "run_sequential",
    "training_seed",
]
