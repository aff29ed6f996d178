"""Bayesian matrix factorization with unitary approximate message passing."""

__version__ = "0.1.0"
