"""Exception types surfaced by the toolkit.

Every failure mode that callers (service, CLI, tests) need to tell apart
gets its own class; handlers report ``type(exc).__name__`` plus the message.
"""


class MondetError(Exception):
    """Base class for all toolkit errors."""


# ---------------------------------------------------------------------------
# tensor container format


class TensorFormatError(MondetError):
    """A tensor file violates the binary container format."""


class MissingTensorFile(TensorFormatError, FileNotFoundError):
    pass


class BadMagic(TensorFormatError):
    pass


class UnsupportedVersion(TensorFormatError):
    pass


class UnsupportedDtype(TensorFormatError):
    pass


class InvalidDims(TensorFormatError):
    pass


class PayloadSizeMismatch(TensorFormatError):
    pass


class NonFiniteValues(MondetError):
    """Tensor values contain NaN or Inf."""


# ---------------------------------------------------------------------------
# dataset manifests


class ManifestError(MondetError):
    pass


class MissingManifestFile(ManifestError, FileNotFoundError):
    pass


class UnknownLabel(ManifestError):
    pass


class UnknownRole(ManifestError):
    pass


class InvalidManifestRow(ManifestError):
    pass


# ---------------------------------------------------------------------------
# persisted model artifacts


class ArtifactError(MondetError):
    pass


# ---------------------------------------------------------------------------
# pipeline math preconditions


class EmptyPool(MondetError):
    """An operation that needs at least one image got none."""


class DimensionMismatch(MondetError):
    pass


class UnknownThreshold(MondetError):
    pass


class DegenerateEvaluation(MondetError):
    """Evaluation set lacks a positive or a negative item."""


class PipelineError(MondetError):
    """A subcommand-level precondition failed."""
