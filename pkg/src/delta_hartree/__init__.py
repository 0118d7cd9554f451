"""Ground states of a Hartree-type equation with a point interaction in R^3."""

from .regimes import Parameters, RegimeError, classify_regime
from .radial import RadialFunction, RadialGrid, build_grid
from .riesz import RieszOperator
from .state import SingularState, energy

__all__ = [
    "Parameters",
    "RegimeError",
    "classify_regime",
    "RadialFunction",
    "RadialGrid",
    "build_grid",
    "RieszOperator",
    "SingularState",
    "energy",
]
__version__ = "0.1.0"
