"""Error types shared across the engine.

Every failure mode carries a stable ``code`` string so file loaders, the
pipeline, the HTTP service, and the CLI can report the same identifier.
"""

from __future__ import annotations


class TelemscanError(Exception):
    """Base class for all engine errors."""

    code = "Error"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class MissingFileError(TelemscanError):
    code = "MissingFile"


class RaggedRowError(TelemscanError):
    code = "RaggedRow"


class NonFiniteValueError(TelemscanError):
    code = "NonFiniteValue"


class NonBinaryCommandError(TelemscanError):
    code = "NonBinaryCommand"


class NonMonotonicIndexError(TelemscanError):
    code = "NonMonotonicIndex"


class DuplicateIndexError(TelemscanError):
    code = "DuplicateIndex"


class InvalidLabelError(TelemscanError):
    code = "InvalidLabel"


class OverlappingLabelsError(TelemscanError):
    code = "OverlappingLabels"


class UnknownLabelClassError(TelemscanError):
    code = "UnknownLabelClass"


class InsufficientHistoryError(TelemscanError):
    code = "InsufficientHistory"


class DegenerateFitError(TelemscanError):
    code = "DegenerateFit"


class AlignmentGapError(TelemscanError):
    code = "AlignmentGap"


class EmptyCandidateError(TelemscanError):
    code = "EmptyCandidate"


class DegenerateWindowError(TelemscanError):
    code = "DegenerateWindow"


class SampleTooSmallError(TelemscanError):
    code = "SampleTooSmall"


class DegenerateSampleError(TelemscanError):
    code = "DegenerateSample"


class CoverageMismatchError(TelemscanError):
    code = "CoverageMismatch"


class ConfigError(TelemscanError):
    code = "ConfigError"


class ContractViolationError(TelemscanError):
    code = "ContractViolation"
