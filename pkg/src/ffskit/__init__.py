"""Exact formal Fourier series on cones of totally positive symmetric matrices
over totally real fields, with theta-series and cycle-calculus backends."""

__version__ = "0.1.0"
