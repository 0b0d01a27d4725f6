"""Orlicz integrability of additive functionals of regenerative Markov chains."""

__version__ = "0.1.0"
