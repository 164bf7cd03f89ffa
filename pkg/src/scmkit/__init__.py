"""Synthetic-control estimation with placebo inference."""

__version__ = "0.1.0"
