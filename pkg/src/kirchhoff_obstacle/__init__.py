"""Clamped Kirchhoff plate obstacle problems with Argyris elements.

The stabilised Nitsche formulation is solved by contact iterations on
conforming C1 quintic elements; residual estimators drive red-green-blue
adaptive refinement.
"""
from .adaptive import AdaptiveHistory, adaptive_solve, convergence_slope
from .argyris import ArgyrisSpace, build_dof_layout, element_basis, interpolate
from .assembly import Discretisation, SolverError, apply_clamped_bcs, assemble_nitsche, contact_state, solve
from .estimator import ErrorBreakdown, estimate, mark_elements
from .mesh import Mesh, build_mesh, build_structured_unit_square, element_geometry, rgb_refine, uniform_refine
from .plate import PlateModel
from .problem import ObstacleProblem
from .quadrature import edge_quadrature, triangle_quadrature
from .solver import DiscreteSolution, reaction_field, solve_contact

__all__ = [
    "AdaptiveHistory",
    "ArgyrisSpace",
    "DiscreteSolution",
    "Discretisation",
    "ErrorBreakdown",
    "Mesh",
    "ObstacleProblem",
    "PlateModel",
    "SolverError",
    "adaptive_solve",
    "apply_clamped_bcs",
    "assemble_nitsche",
    "build_dof_layout",
    "build_mesh",
    "build_structured_unit_square",
    "contact_state",
    "convergence_slope",
    "edge_quadrature",
    "element_basis",
    "element_geometry",
    "estimate",
    "interpolate",
    "mark_elements",
    "reaction_field",
    "rgb_refine",
    "solve",
    "solve_contact",
    "triangle_quadrature",
    "uniform_refine",
]

__version__ = "0.1.0"
