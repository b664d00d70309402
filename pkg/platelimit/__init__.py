"""Finite element kinematic limit analysis of thin plates."""

from .__version__ import __version__ as __version__

__description__ = "Upper-bound collapse loads of Love-Kirchhoff plates by conic programming"

__all__ = ["__version__", "__description__"]
