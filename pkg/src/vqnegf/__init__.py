"""Variational quantum linear solver for 1D NEGF quantum transport on an exact statevector simulator."""

__version__ = "0.1.0"
