"""
Error kinds raised across the lab.

Every error carries the name of the module that raised it and, once the
runner has seen it, the replication index it happened in.
"""
from typing import Optional


class LabError(Exception):
    """Base class for every error the lab raises on purpose."""

    kind = "lab-error"

    def __init__(self, message: str, module: Optional[str] = None, replication: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.module = module
        self.replication = replication

    def with_replication(self, replication: int) -> "LabError":
        self.replication = replication
        return self

    def __str__(self) -> str:
        parts = [self.kind]
        if self.module:
            parts.append(f"module={self.module}")
        if self.replication is not None:
            parts.append(f"replication={self.replication}")
        return f"[{' '.join(parts)}] {self.message}"


class InvalidArgumentError(LabError, ValueError):
    kind = "invalid-argument"


class TruncationError(LabError):
    kind = "truncation-error"


class ConvergenceError(LabError):
    kind = "convergence-failure"

    def __init__(self, message: str, last_residual: float, module: Optional[str] = None):
        super().__init__(message, module=module)
        self.last_residual = last_residual


class ContractionViolatedError(LabError):
    kind = "contraction-violated"


class SupportViolationError(LabError):
    kind = "support-violation"


class RearrangementError(LabError):
    kind = "rearrangement-failure"


class EvaluationRangeError(LabError):
    kind = "evaluation-range"


class HorizonExhaustedError(LabError):
    kind = "horizon-exhausted"


class ConfigurationError(LabError):
    kind = "configuration"


class LedgerCorruptionError(LabError):
    kind = "ledger-corruption"


class DegenerateConditionalError(LabError):
    kind = "degenerate-conditional"


class SpecViolationError(LabError):
    kind = "spec-violation"
