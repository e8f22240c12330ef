from typing import Any, Dict, Iterable, Optional


class KwsError(Exception):
    """Base class for all protokws errors."""

    exit_code: int = 2

    def __init__(self, message: str, developer_message: Optional[str] = None):
        self.message = message
        self.developer_message = developer_message or message
        super().__init__(self.message)

    def to_summary(self) -> Dict[str, Any]:
        """Convert this error to the JSON summary printed by the CLI."""
        return {
            "status": "error",
            "error": type(self).__name__,
            "message": self.message,
            "exit_code": self.exit_code,
        }


class UsageError(KwsError):
    """Error raised when the caller asked for something malformed."""

    exit_code = 1


class DataError(KwsError):
    """Error raised when a manifest, feature file or checkpoint is unusable."""

    exit_code = 2


class NumericError(KwsError):
    """Error raised when a computation leaves the finite domain."""

    exit_code = 3


# Usage errors


class InvalidConfig(UsageError):
    """A configuration document failed validation."""


class InvalidDims(UsageError):
    """Encoder dimensions are not all positive."""


# Data errors


class MalformedRecord(DataError):
    """A manifest line is not a valid record."""

    def __init__(self, message: str, line_number: int = 0, developer_message: Optional[str] = None):
        super().__init__(message, developer_message)
        self.line_number = line_number


class InvalidLabel(DataError):
    """A class id outside {-1, 0..9}."""


class DuplicateUttId(DataError):
    """The same utt_id appears twice in one manifest."""


class BadMagic(DataError):
    """A binary file does not start with the expected magic bytes."""


class VersionMismatch(DataError):
    """A binary file was written with an unsupported format version."""


class TruncatedPayload(DataError):
    """A binary file is shorter (or longer) than its header promises."""


class ZeroFrames(DataError):
    """A feature file declares zero frames."""


class NonFiniteValue(DataError):
    """A matrix to be written contains NaN or Inf."""


class IoFailure(DataError):
    """The filesystem refused a read or write."""


class DimensionMismatch(DataError):
    """Feature dimensions disagree."""


DimMismatch = DimensionMismatch


class ShapeMismatch(DataError):
    """Parameter shapes are mutually inconsistent."""


class ClassTooSmall(DataError):
    """A class has fewer than two enrollment utterances."""


class EmptyDataset(DataError):
    """Training was asked to run on no data."""


class SpeakerLeakage(DataError):
    """A target speaker appears in speaker-independent training data."""


class MissingClass(DataError):
    """Enrollment does not cover every class."""

    def __init__(self, missing: Iterable[int], developer_message: Optional[str] = None):
        self.missing = sorted(missing, key=lambda c: (c < 0, c))
        super().__init__(f"Enrollment is missing classes: {self.missing}", developer_message)


class ZeroPrototype(DataError):
    """A prototype averaged out to the zero vector."""


class EmptyEnrollment(DataError):
    """KNN classification was asked to search an empty enrollment set."""


class LengthMismatch(DataError):
    """Predictions and gold labels are not aligned."""


class EmptyStratum(DataError):
    """An evaluation set lacks keyword or non-keyword samples."""


# Numeric errors


class NonFiniteLogits(NumericError):
    """Logits passed to a loss contain NaN or Inf."""


class NonFiniteLoss(NumericError):
    """A loss evaluated to NaN or Inf."""


class ZeroEmbedding(NumericError):
    """An embedding with zero norm cannot be normalised."""


class ZeroVector(NumericError):
    """Cosine similarity is undefined for a zero vector."""


class BatchTooSmall(NumericError):
    """Contrastive loss needs at least two samples."""


class TargetTooLong(NumericError):
    """A CTC target cannot be aligned to the available frames."""
