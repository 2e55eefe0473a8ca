"""Symmetric OT-regularised normalizing flows for distribution transport."""

__version__ = "0.1.0"
