"""Causal digital twins for stress-testing tabular classifiers under parametric concept drift."""

__version__ = "0.1.0"
