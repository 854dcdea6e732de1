"""Numerical laboratory for the 1D stochastic heat equation with irregular drift."""

from ._backend import ACTIVE as backend

__version__ = "0.1.0"
__all__ = ["backend", "__version__"]
