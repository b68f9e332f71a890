"""Exact and approximate two-way spectral clustering with a benchmark harness."""

__version__ = "0.1.0"
