"""Doubly reflected BSDEs on a binomial random-walk lattice.

Four backward schemes (implicit and implicit-explicit penalization,
implicit and explicit reflection), a full path-tree oracle, trajectory
sampling and convergence tables.
"""

from .lattice import WalkGrid, b_value, cond_expectation, z_from_children
from .model import (
    Absent,
    ExplicitReflected,
    Functional,
    GeneratorSpec,
    ImplicitExplicitPenalization,
    ImplicitPenalization,
    ImplicitReflected,
    ItoConstant,
    ItoGeneral,
    Markovian,
    PathFunctional,
    Problem,
    make_scheme,
    validate,
)
from .schemes import NumericalError, ValidationError, root_value, solve_backward

__version__ = "0.1.0"

__all__ = [
    "Absent", "ExplicitReflected", "Functional", "GeneratorSpec", "ImplicitExplicitPenalization",
    "ImplicitPenalization", "ImplicitReflected", "ItoConstant", "ItoGeneral", "Markovian",
    "NumericalError", "PathFunctional", "Problem", "ValidationError", "WalkGrid", "b_value",
    "cond_expectation", "make_scheme", "root_value", "solve_backward", "validate", "z_from_children",
]
