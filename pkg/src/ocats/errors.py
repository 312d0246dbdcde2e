"""Exception hierarchy shared across the package."""


class OcatsError(Exception):
    """Base class for all package errors."""


class DimensionError(OcatsError):
    """Vector dimensionality mismatch or drift."""


class DegenerateVectorError(OcatsError):
    """Vector with NaN/infinite components or zero norm."""


class UnknownLabelError(OcatsError):
    """Label not present in the label space."""


class FormatError(OcatsError):
    """File failed to parse. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class SchemaError(OcatsError):
    """Record parsed but violates the expected schema."""


class InsufficientClassError(OcatsError):
    """A class has too few instances for the requested split sizes."""

    def __init__(self, label, available, required):
        super().__init__(
            f"class {label!r} has {available} instances, needs {required}"
        )
        self.label = label


class MissingEmbeddingError(OcatsError):
    """Instance ids without a vector in the embedding file."""


class EmptyCacheError(OcatsError):
    """Nearest-neighbor query against a cache with no usable entries."""


class EmptyNeighborhoodError(OcatsError):
    """Neighbor-list operation called with no neighbors."""


class EmptyTrainingError(OcatsError):
    """Model training requested with an empty training set."""


class MissingGoldError(OcatsError):
    """Metric requires gold labels but a trace step has none."""


class EmptyTraceError(OcatsError):
    """Metric over zero processed instances is undefined."""


class TraceShapeError(OcatsError):
    """Traces of unequal length cannot be aggregated."""


class TeacherUnavailableError(OcatsError):
    """Teacher backend unreachable after retries."""


class TeacherProtocolError(OcatsError):
    """Teacher replied with text that cannot be canonicalized to a label."""

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text


class OracleNeedsGoldError(OcatsError):
    """Oracle teacher called on an instance without a gold label."""


class FixtureMissError(OcatsError):
    """Replay teacher has no recorded response for this instance/prompt."""


class IoError(OcatsError):
    """Underlying file I/O failed."""


class ConfigError(OcatsError):
    """Invalid experiment or gateway configuration."""
