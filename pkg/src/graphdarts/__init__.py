"""Differentiable architecture search for small interpretable computation graphs."""

__version__ = "0.1.0"
