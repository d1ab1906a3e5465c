"""Failure types for the extraction pipeline."""


class ExtractError(Exception):
    """Base class for everything this package raises on purpose."""


class ModelLoadError(ExtractError):
    """The model identifier cannot be resolved to a working encoder."""


class DatasetNotFound(ExtractError):
    """The dataset identifier names neither a directory nor a known entry."""


class EmptyClassList(ExtractError):
    """The dataset resolved but offers no classes (or no images) to embed."""
