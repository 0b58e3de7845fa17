"""Budgeted branch-and-prune orchestration for multi-agent analysis pipelines."""

__version__ = "0.1.0"
