"""
Runtime settings.

Values come from environment variables, read on every call so that
command-line flags (which export the variables) and tests can override them:

- ``ANGLESET_PRECISION_BITS``: working precision for real-valued evaluation.
- ``ANGLESET_THREADS``: worker cap for the triple scan.
- ``ANGLESET_ENUMERATION_BUDGET``: greedy candidate budget.
- ``ANGLESET_DATABASE_URL``: run-ledger database.
"""

from __future__ import annotations

import os

from models.errors import InvalidInputError

DEFAULT_PRECISION_BITS = 128
MIN_PRECISION_BITS = 64
DEFAULT_THREADS = 1
DEFAULT_ENUMERATION_BUDGET = 20_000_000
DEFAULT_DATABASE_URL = "sqlite:///./angleset.db"


def _int_from_env(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise InvalidInputError(f"{name} must be an integer, got {raw!r}") from exc
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return value


def precision_bits() -> int:
    return _int_from_env("ANGLESET_PRECISION_BITS", DEFAULT_PRECISION_BITS, MIN_PRECISION_BITS)


def worker_threads() -> int:
    return _int_from_env("ANGLESET_THREADS", DEFAULT_THREADS, 1)


def enumeration_budget() -> int:
    return _int_from_env("ANGLESET_ENUMERATION_BUDGET", DEFAULT_ENUMERATION_BUDGET, 1)


def database_url() -> str:
    return os.getenv("ANGLESET_DATABASE_URL", DEFAULT_DATABASE_URL)
