"""Exception hierarchy for natlas.

``ValidationError`` marks bad user input (CLI exit code 2); everything else
raised while running is a runtime failure (exit code 3).
"""

from __future__ import annotations


class NatlasError(Exception):
    """Root of all toolkit errors."""


class ValidationError(NatlasError, ValueError):
    """Input rejected before or while it was interpreted."""


class ConfigError(ValidationError):
    pass


class CheckpointError(ValidationError):
    pass


class CorruptHeaderError(CheckpointError):
    pass


class ShapeMismatchError(CheckpointError):
    pass


class TruncatedBlobError(CheckpointError):
    pass


class DirectiveError(ValidationError):
    pass


class CorpusError(ValidationError):
    pass


class StatsError(ValidationError):
    pass


class PlanConflictError(ValidationError):
    def __init__(self, layer: int, neuron: int, values: tuple[float, float]) -> None:
        super().__init__(f"conflicting set directives on layer {layer} neuron {neuron}: {values[0]!r} vs {values[1]!r}")
        self.layer = layer
        self.neuron = neuron
        self.values = values


class NatlasRuntimeError(NatlasError, RuntimeError):
    """Failure while executing an otherwise valid request."""


class DivergenceError(NatlasRuntimeError):
    def __init__(self, step: int, loss: float) -> None:
        super().__init__(f"training diverged at step {step} (loss={loss!r})")
        self.step = step
        self.loss = loss


__all__ = [
    "CheckpointError",
    "ConfigError",
    "CorpusError",
    "CorruptHeaderError",
    "DirectiveError",
    "DivergenceError",
    "NatlasError",
    "NatlasRuntimeError",
    "PlanConflictError",
    "ShapeMismatchError",
    "StatsError",
    "TruncatedBlobError",
    "ValidationError",
]
