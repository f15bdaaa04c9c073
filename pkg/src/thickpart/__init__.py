"""Thick-part decomposition toolkit for hyperbolic tube quotients."""

__version__ = "0.1.0"
