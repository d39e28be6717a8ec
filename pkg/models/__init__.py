"""Schemas, settings, errors and the run-ledger tables."""
