"""Radial focusing cubic NLS on R^3 and on the exterior of a ball.

Ground state by shooting, conservative implicit time stepping, Morawetz and
interaction-Morawetz diagnostics, and threshold/scattering classification.
"""

from .radial import RadialField, RadialGrid, make_grid, norms
from .ground_state import find_ground_state, thresholds
from .config import RunConfig, load_config, parse_config
from .evolve import SimState, evolve

__version__ = "0.1.0"

__all__ = [
    "RadialField", "RadialGrid", "make_grid", "norms",
    "find_ground_state", "thresholds",
    "RunConfig", "load_config", "parse_config",
    "SimState", "evolve",
]
