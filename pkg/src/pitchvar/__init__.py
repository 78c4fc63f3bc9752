"""Stochastic modulation-spectrum post-filter for synthesized pitch contours."""

__version__ = "0.1.0"
