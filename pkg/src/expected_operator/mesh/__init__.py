"""Dyadic grids, finite elements and the Haar basis."""

from .grid import FineGrid, HierGrid
from .haar import HaarBasis, build_haar

__all__ = ["FineGrid", "HierGrid", "HaarBasis", "build_haar"]
