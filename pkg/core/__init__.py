"""Tensor decomposition engines: algebra, constrained factorizations and pipelines."""
