"""Contour-integral functional calculus for sectorial matrices.

Resolvent sampling certifies sectoriality; contour quadrature then gives
fractional powers, semigroups, the inverse of a commuting operator sum and
solutions of first and second order evolution equations.
"""

from .contour import Keyhole, VerticalLine, discretize, integrate
from .dpgsum import SumProblem, kappa_apply, sum_residual
from .errors import SectorialError
from .funcalc import frac_power_neg, frac_power_pos, hcalc_apply, semigroup
from .hyperbolic import hyperbolic_solve, make_problem, verify_identities
from .parabolic import GridFunction, parabolic_solve
from .sectorial import SectorialOperator, certify, certify_parabola_class, certify_sector, extend_sector

__version__ = "0.1.0"

__all__ = [
    "GridFunction",
    "Keyhole",
    "SectorialError",
    "SectorialOperator",
    "SumProblem",
    "VerticalLine",
    "certify",
    "certify_parabola_class",
    "certify_sector",
    "discretize",
    "extend_sector",
    "frac_power_neg",
    "frac_power_pos",
    "hcalc_apply",
    "hyperbolic_solve",
    "integrate",
    "kappa_apply",
    "make_problem",
    "parabolic_solve",
    "semigroup",
    "sum_residual",
    "verify_identities",
]
