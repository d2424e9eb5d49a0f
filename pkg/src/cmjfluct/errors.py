"""Exception types shared across the package."""

from __future__ import annotations


class RefusalError(RuntimeError):
    """Raised when a requested quantity does not exist for the given law.

    A refusal is a principled "this object has no such limit / this method
    does not apply here" answer (for example, asking for the limiting
    covariance measure of a law whose fluctuations oscillate without a
    limit).  It is distinct from a fault, which signals a broken input or an
    internal numerical failure.
    """


class UsageError(ValueError):
    """Raised for malformed configuration files or command-line input."""
