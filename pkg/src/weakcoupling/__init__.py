"""Weak-coupling particle systems and the Landau collision operator."""

__version__ = "0.1.0"
