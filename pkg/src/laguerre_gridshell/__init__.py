"""Gridshells on generalized Dupin cyclides: Laguerre maps, membrane targets, frame sizing."""

__version__ = "0.1.0"
