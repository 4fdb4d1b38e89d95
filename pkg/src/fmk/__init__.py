"""Numerical verification kit for F-manifolds with eventual identities."""

__version__ = "0.1.0"
