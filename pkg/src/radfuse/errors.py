"""Exception types shared across the package.

Argument-contract violations raise plain ValueError; these classes cover
data, format, and provider failures so the CLI can map them to exit codes.
"""


class RadfuseError(Exception):
    """Base class for package-specific failures."""


class ImageDecodeError(RadfuseError):
    """File could not be decoded as an image."""


class ImageFormatError(RadfuseError):
    """Decoded image has an unsupported layout (channel count, bit depth)."""


class IngestError(RadfuseError):
    """Dataset manifest or class-directory tree is invalid."""


class ExtractionError(RadfuseError):
    """Feature extraction failed for a specific sample.

    Single-argument constructor keeps the exception picklable across
    process-pool workers; the message always names the sample id.
    """

    def __init__(self, message, sample_id=None):
        super().__init__(message)
        self.sample_id = sample_id


class FeatureFileError(RadfuseError):
    """RFF1 feature file is malformed, truncated, or corrupt."""


class ModelFormatError(RadfuseError):
    """Serialized pipeline model is malformed."""


class ModelVersionError(ModelFormatError):
    """Serialized model uses an unsupported schema version."""


class ModelChecksumError(ModelFormatError):
    """Serialized model failed its integrity check."""


class ProviderError(RadfuseError):
    """Deep-feature provider misconfiguration or row-shape mismatch."""


class DegenerateDataError(RadfuseError):
    """Input data carries no usable variance (e.g. all-identical rows)."""


class ConfigError(RadfuseError):
    """Run configuration failed schema validation."""
