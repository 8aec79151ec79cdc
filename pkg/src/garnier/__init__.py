"""Exact verification and numerical integration of a five-parameter Garnier-type system."""

__version__ = "0.1.0"
