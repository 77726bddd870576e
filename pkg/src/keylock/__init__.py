"""Routing-based logic locking workbench."""

__version__ = "0.1.0"
