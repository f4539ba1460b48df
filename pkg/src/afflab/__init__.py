"""Exact verification lab for Poisson representations of the p-adic step affine group."""

__version__ = "0.1.0"
