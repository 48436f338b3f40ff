"""Front tracking for conservation laws with piecewise-constant coefficients, and the inverse problems built on it."""

__version__ = "0.1.0"
