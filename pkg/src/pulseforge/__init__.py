"""Pulse-level programming toolkit with a Lindblad backend and CR characterization."""

__version__ = "0.1.0"
