"""Rendering of tuned-suboptimality comparison figures from sweep CSVs."""

__version__ = "0.1.0"
