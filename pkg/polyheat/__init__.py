"""Polyheat: a numerical lab for polyharmonic heat equations with exponential nonlinearities."""

__version__ = "1.0.0"
__author__ = "Grumpified-OGGVCT"
__all__ = ["core", "utils"]
