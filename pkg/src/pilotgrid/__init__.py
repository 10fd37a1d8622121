"""Pilot pattern design and pilot-aided channel estimation for OFDM."""
from .errors import ConfigurationError
from .grid import (LatticeBasis, OfdmGridSpec, PatternKind, PilotPattern,
                   RegularizedScale, cell_basis, make_grid_pattern,
                   make_pattern, rasterize)

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "LatticeBasis", "OfdmGridSpec",
           "PatternKind", "PilotPattern", "RegularizedScale", "cell_basis",
           "make_grid_pattern", "make_pattern", "rasterize"]
