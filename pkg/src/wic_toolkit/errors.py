"""Exception hierarchy for the toolkit.

Every domain failure raises a distinct subclass of :class:`WicError` so
callers (and the CLI exit-code mapping) can tell data problems from
numeric/runtime problems. Plain ``ValueError`` is reserved for contract
violations that indicate a programming bug, not bad input data.
"""


class WicError(Exception):
    """Base class for all toolkit errors."""


class DataFormatError(WicError):
    """Malformed input file: bad JSON, missing keys, wrong types."""


class GoldJoinError(WicError):
    """Gold labels and data records do not join 1:1 by id."""


class SpanValidationError(WicError):
    """A target-word character span violates the sentence bounds or
    whitespace invariants."""


class MergeError(WicError):
    """Duplicate pair id across corpora being merged."""


class SplitError(WicError):
    """A lemma split cannot produce two non-empty sides."""


class AlignmentError(WicError):
    """No sub-token overlaps the target span (e.g. truncated away)."""


class DegenerateEmbeddingError(WicError):
    """A pooled target vector has (near-)zero norm; cosine is undefined."""


class CalibrationError(WicError):
    """ROC calibration is impossible, e.g. only one class present."""


class EvaluationError(WicError):
    """Predictions and gold labels do not line up by id."""


class EncoderRegistryError(WicError):
    """Unknown encoder name requested from the registry."""


class TrainingError(WicError):
    """Training aborted, e.g. non-finite loss."""


class ConfigError(WicError):
    """Invalid experiment configuration (unknown keys, bad values)."""


class OutputLockError(WicError):
    """Another run holds the lock on the requested output directory."""
