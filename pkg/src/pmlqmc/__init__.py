"""p-refined multilevel quasi-Monte Carlo with nested random-field points.

The package compares three ways of choosing where a Karhunen-Loève field is
evaluated on a hierarchy of increasing-order Lagrange triangles: non-nested
(NNA), globally nested (GNA) and locally nested (LNA) point sets.
"""

from .errors import (
    ConfigurationError,
    HierarchyError,
    InputError,
    InsufficientDataError,
    MeshError,
    NumericalError,
    ParseError,
    PMLQMCError,
)
from .point_selection import Approach

__version__ = "0.1.0"

__all__ = [
    "Approach",
    "ConfigurationError",
    "HierarchyError",
    "InputError",
    "InsufficientDataError",
    "MeshError",
    "NumericalError",
    "ParseError",
    "PMLQMCError",
    "__version__",
]
