"""Exception types shared across the package."""


class DomainError(ValueError):
    """An operation was called with inputs outside its contract."""


class FormatError(ValueError):
    """A file violates one of the on-disk format contracts."""


class BackendError(RuntimeError):
    """A model backend could not produce a result after retries."""


class ProtocolError(BackendError):
    """A backend replied, but the response body is not in the expected shape."""
