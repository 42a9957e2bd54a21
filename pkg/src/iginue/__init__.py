"""Overlap-weighted correlation kernels for the induced Ginibre ensemble."""

__version__ = "0.1.0"
