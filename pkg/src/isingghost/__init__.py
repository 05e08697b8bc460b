"""Graphical representations of the critical 2D Ising model with a ghost field."""

from .lattice import (BETA_C, FREE, WIRED, BoundaryCondition, GhostGraph, Rect, RectFrame,
                      build_domain_graph, build_graph, quotient_by_boundary)

__version__ = "0.1.0"
