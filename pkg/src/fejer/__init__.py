"""Quantitative Fejer monotonicity: rate evaluators, two proximal-point style
iterations, and a harness that checks the bounds against brute force."""

__version__ = "0.1.0"
