"""Spectral and n-gram signatures of known-weak source files, and a scanner built on them."""

__version__ = "0.1.0"
