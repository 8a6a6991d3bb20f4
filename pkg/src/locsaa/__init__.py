"""Localized sample average approximation: deviation inequalities and experiments."""

__version__ = "0.1.0"
