"""Numerical toolkit for sub-actions of intermittent interval maps."""

__version__ = "0.1.0"
