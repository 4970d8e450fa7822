"""Exception types shared across the package."""


class CicdError(Exception):
    """Base class for package-specific errors."""


class ShapeMismatch(CicdError):
    """Operands have incompatible shapes."""


class NonFinite(CicdError):
    """An operation received non-finite input values."""


class AllMasked(CicdError):
    """A softmax slice has no unmasked entry."""


class NonScalarRoot(CicdError):
    """backward() called on a non-scalar tensor."""


class StaleGraph(CicdError):
    """backward() called twice on the same recorded graph."""


class MissingGrad(CicdError):
    """Optimizer step requested while a parameter has no gradient buffer."""


class WidthMismatch(CicdError):
    """Global and local evidence widths differ and projection mode is off."""


class EmptyCorpus(CicdError):
    """Vocabulary build requested over an empty corpus."""


class ParseError(CicdError):
    """A corpus line is not valid JSON; message carries the line number."""


class MissingField(CicdError):
    """A corpus record lacks a required field or has an empty article list."""


class UnknownLabelName(CicdError):
    """A label string is absent from the configured label table."""


class UnknownLabel(CicdError):
    """A label index is out of range for the configured class count."""


class EmptyDataset(CicdError):
    """Evaluation requested on a dataset with no instances."""


class ConfigError(CicdError):
    """Invalid or missing configuration field; message names the field."""


class CheckpointMismatch(CicdError):
    """Checkpoint parameter shapes differ from the configured model."""
