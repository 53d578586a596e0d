"""Lifting and POD model reduction for nonlinear systems."""

__version__ = "0.1.0"
