"""Lattice laboratory for the elliptic Yang-Mills functional on a flat 2-torus."""
from . import lie, lattice, functional, critical, flow, hybrid, morse, checks, io

__version__ = "0.1.0"
