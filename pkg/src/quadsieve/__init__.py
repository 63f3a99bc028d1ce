"""Integral points, local densities and sieves on affine quadrics q(x) = m over Q."""

__version__ = "0.1.0"
