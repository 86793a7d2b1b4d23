"""Exception types shared across the package."""


class BlinkwatchError(Exception):
    """Base class for all blinkwatch errors."""


class PgmError(BlinkwatchError):
    """Malformed or unsupported PGM data."""


class ModelFormatError(BlinkwatchError):
    """Invalid native cascade model data."""


class ModelVersionError(ModelFormatError):
    """Native model has an unsupported format version."""


class ModelTruncationError(ModelFormatError):
    """Native model data ends before the declared content."""


class ModelInvariantError(ModelFormatError):
    """Decoded model violates a structural invariant."""


class CascadeXmlError(BlinkwatchError):
    """Legacy cascade XML cannot be parsed."""


class UnsupportedCascadeError(CascadeXmlError):
    """Legacy cascade XML is well-formed but uses an unsupported dialect."""


class TrainingError(BlinkwatchError):
    """Boosting or cascade training cannot proceed."""


class DatasetError(BlinkwatchError):
    """Evaluation dataset is missing, empty or malformed."""
