"""Conditionally centered statistics and pseudolikelihood inference for Ising models and ERGMs."""

__version__ = "0.1.0"
