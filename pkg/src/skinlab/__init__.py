"""Numerical laboratory for skinning measures and equidistribution on hyperbolic surfaces."""

__version__ = "0.1.0"
