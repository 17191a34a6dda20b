"""Discrete parabolic solvers and tent-space norms on periodic grids."""
from __future__ import annotations

__version__ = "0.1.0"

from ._kernels import BACKEND
from .coefficients import CoefficientField, make_coefficient_field
from .geometry import Grid, TimeGrid, build_grid, build_time_grid
from .operator import DiscreteOperator, assemble_operator
from .propagator import PropagatorCache, build_propagator, propagator_for
from .tentspaces import SpaceTimeField, tent_norm

__all__ = [
    "BACKEND",
    "CoefficientField",
    "DiscreteOperator",
    "Grid",
    "PropagatorCache",
    "SpaceTimeField",
    "TimeGrid",
    "assemble_operator",
    "build_grid",
    "build_propagator",
    "build_time_grid",
    "make_coefficient_field",
    "propagator_for",
    "tent_norm",
]
