"""
Exception types raised by the angleset services.

All of them derive from ``ValueError`` so callers that only care about
"bad input or failed check" can keep catching ``ValueError``; ``main.py``
maps each subclass to its exit code.
"""

from __future__ import annotations


class AngleSetError(ValueError):
    """Base class for every error raised on purpose by the toolkit."""


class InvalidInputError(AngleSetError):
    """A parameter or point set violates the documented preconditions."""


class BudgetExceededError(AngleSetError):
    """An enumeration or candidate budget would be exceeded."""


class CertificationError(AngleSetError):
    """A certified inequality failed to hold on concrete data."""
