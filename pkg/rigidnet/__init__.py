from . import exceptions, numerics, geometry, graph, rigidity, ais, localization, formation
from .rigidnet import *

__all__ = [
    "exceptions",
    "numerics",
    "geometry",
    "graph",
    "rigidity",
    "ais",
    "localization",
    "formation",
    "cli",
    "plotting",
]
