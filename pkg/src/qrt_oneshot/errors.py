"""Exception types shared across modules."""
from __future__ import annotations


class PreconditionError(ValueError):
    """An operation was asked to run outside its domain.

    ``reason`` is a short machine-readable tag.
    """

    def __init__(self, message: str, reason: str = "precondition"):
        super().__init__(message)
        self.reason = reason


class CertificateError(RuntimeError):
    """A constructed channel failed verification."""

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate
