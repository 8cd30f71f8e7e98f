"""Nonlocal problems with gradient constraints and their double obstacle form."""

__version__ = "0.1.0"
