# shared/errors.py
"""
Exception hierarchy for BayesFair.

All library errors derive from BayesFairError. Input validation errors are
also ValueErrors so callers that only catch ValueError keep working.
"""

from typing import Sequence


class BayesFairError(Exception):
    """Base class for all BayesFair errors."""


class InputError(BayesFairError, ValueError):
    """Invalid argument: index out of bounds, mismatched spaces, bad counts."""


class ConfigError(InputError):
    """Invalid experiment or training configuration."""


class SchemaError(InputError):
    """Discretization schema is malformed or does not match the table."""


class DegenerateOutcome(BayesFairError):
    """Conditioning on an outcome with zero marginal probability."""

    def __init__(self, outcomes: Sequence[int]):
        self.outcomes = tuple(int(y) for y in outcomes)
        super().__init__(f"Outcomes with zero probability: {list(self.outcomes)}")


class DegeneratePolicy(BayesFairError):
    """Every action has zero probability under the induced joint."""


class DegenerateEstimate(BayesFairError):
    """Empirical estimate requested from no data and no smoothing."""


class ImpossibleObservation(BayesFairError):
    """Every support model assigns zero likelihood to an observed record."""
