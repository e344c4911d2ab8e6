"""Vanishing-discount and additive-eigenvalue experiments for state-constraint
Hamilton-Jacobi equations on scaled star-shaped domains."""

__version__ = "0.1.0"
