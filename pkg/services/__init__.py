"""Bounds, construction, verification and oracles for angle-constrained point sets."""
