"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument has the wrong shape, range or type."""


class FormatError(ValueError):
    """A file does not follow the expected on-disk layout."""


class UnsupportedFormatError(FormatError):
    """A well-formed file whose parameters this package does not handle."""


class MissingTensorError(KeyError):
    """A named tensor is absent from a weight archive."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class UnsupportedConfigurationError(ValueError):
    """A model configuration cannot be used for the requested operation."""


class InvalidStateError(RuntimeError):
    """An operation was attempted on a stream in the wrong state."""
