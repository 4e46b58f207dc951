"""Opacity verification and enforcement for safe partially observed quantum Petri nets."""

__version__ = "0.1.0"
