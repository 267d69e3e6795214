"""Evaluate full-reference image quality metrics against JND-scaled subjective scores."""

__version__ = "0.1.0"
