"""Benchmark orchestration, scaling analysis and procurement evaluation."""

__version__ = "0.1.0"
