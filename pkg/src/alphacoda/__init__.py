"""Compositional mortality forecasting with log-ratio and alpha transformations."""

__version__ = "0.1.0"
