"""SH surface waves in 2D-periodic half-spaces.

The decaying-mode projector of the one-period propagator is computed from
a Riccati-propagated resolvent and a contour quadrature, then reduced to
dispersion functions whose zeros are surface waves.
"""
from .cell import Circle, Lattice, Layer, Material, Rectangle, ToeplitzProfile, UnitCell, flip_cell
from .dispersion import DispersionSample, PointSolver, SolverSettings
from .kernels import BACKEND
from .projector import ProjectorSet, projector_decaying, projector_set
from .riccati import ResolventAtAlpha, integrate_resolvent, shift_resolvent
from .stateop import StateMatrix, assemble_q, structure_matrices

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Circle",
    "DispersionSample",
    "Lattice",
    "Layer",
    "Material",
    "PointSolver",
    "ProjectorSet",
    "Rectangle",
    "ResolventAtAlpha",
    "SolverSettings",
    "StateMatrix",
    "ToeplitzProfile",
    "UnitCell",
    "assemble_q",
    "flip_cell",
    "integrate_resolvent",
    "projector_decaying",
    "projector_set",
    "shift_resolvent",
    "structure_matrices",
]
