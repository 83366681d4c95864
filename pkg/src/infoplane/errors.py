"""Exception hierarchy shared across the package."""


class InfoplaneError(Exception):
    """Base class for all package errors."""


class ShapeError(InfoplaneError):
    """An array argument has an incompatible shape; the message names the offending dimension."""


class DataFormatError(InfoplaneError):
    """A dataset file does not conform to its binary format."""


class BadMagicError(DataFormatError):
    """IDX magic number does not match the expected record type."""


class TruncatedDataError(DataFormatError):
    """Payload is shorter than the header promises."""


class LabelRangeError(DataFormatError):
    """A label value falls outside [0, class_count)."""


class ChecksumError(InfoplaneError):
    """A downloaded or cached file failed hash verification."""


class FetchError(InfoplaneError):
    """A dataset download failed and no valid cached copy exists."""


class ConfigError(InfoplaneError):
    """An experiment config is malformed; the message names the offending key path."""


class SchemaVersionError(InfoplaneError):
    """A persisted file declares a schema version this code cannot read."""


class EstimatorError(InfoplaneError):
    """Mutual-information estimation failed (e.g. non-finite activations)."""


class TrainingDivergedError(InfoplaneError):
    """Loss became non-finite during training; the message names the epoch."""
