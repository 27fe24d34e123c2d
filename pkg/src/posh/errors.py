"""Exception types shared across the package."""


class PoshError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(PoshError):
    """Interchange JSON is structurally invalid (missing/extra/mistyped fields)."""


class VersionError(PoshError):
    """Interchange JSON declares an unsupported schema version."""


class IntegrityError(PoshError):
    """Interchange JSON is well-formed but violates a document invariant."""


class NoIdentifier(PoshError):
    """Every candidate identifier for an object collides with another object's."""


class TemplateError(PoshError):
    """A question template could not be instantiated."""


class JudgeUnavailable(PoshError):
    """The judge endpoint failed after all retries."""


class NoDigitToken(PoshError):
    """No answer digit could be recovered from a judge response."""


class MissingGold(PoshError):
    """A gold-judgment file is absent or empty."""


class UnknownLabel(PoshError):
    """A coarse judgment label is not one of the five known values."""


class UnknownModel(PoshError):
    """A result references a model missing from the model map."""


class EmbedderUnavailable(PoshError):
    """The embedding endpoint failed after all retries."""
