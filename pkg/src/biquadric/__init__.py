"""Verification toolkit for rational points on the biquadric sum x_i y_i^2 = 0.

Exact counters, archimedean and non-archimedean densities, exponential-sum
diagnostics and the assembled leading constant, with a command-line front end
in :mod:`biquadric.cli`.
"""
from .core_forms import HeightContext, height, evaluate_form, is_primitive, delta_profile
from .errors import BudgetExceeded, PreconditionError, ToleranceUnreachable
from .lattice_geometry import solution_lattice, successive_minima, count_lattice_points_box
from .real_densities import (DensityValue, QuadratureSettings, rho_infinity, sigma_infinity,
                             tau_infinity, tau_reference)
from .arithmetic_densities import (gauss_sum, complete_sum_Sq, singular_series, psi, zeta,
                                   local_density, peyre_constant)
from .exponential_sums import weyl_sum, classify_arc, hua_fourth_moment
from .counting_harness import (CountRecord, PredictionRecord, count_M1, count_M2, count_M3,
                               count_M4, count_global, predict_M1, predict_M3, asymptotic_report)

__version__ = "0.1.0"
