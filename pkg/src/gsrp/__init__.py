"""Generalized steered response power localization."""

__version__ = "0.1.0"
