"""Varying-order NURBS discretisations for 2D frictional contact."""

from .nurbs import (DomainError, KnotVector, NurbsCurve, NurbsPatch, bspline_basis,
                    bspline_basis_ders, curve_point, find_span, nurbs_basis_1d, surface_point)
from .refine import (ConfigurationError, RefinementError, RefinementPlan, VoPatch,
                     build_vo_patch, elevate_order, insert_knot, k_refine, parse_plan,
                     refine_knots, vo_element_basis)

__version__ = "0.1.0"
