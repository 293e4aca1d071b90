"""Predict multi-walk speedups of Las Vegas algorithms from runtime samples."""

__version__ = "0.1.0"
