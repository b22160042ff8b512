"""Morphosyntactic divergence analysis for parallel dependency treebanks."""

__version__ = "0.1.0"
