"""Numerical checks for the cone-angle Einstein family, its gluing to the
hyperbolic metric, and the estimate chain built on top of it."""

__version__ = "0.1.0"
