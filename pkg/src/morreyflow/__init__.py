"""Numerical laboratory for heat smoothing in Morrey spaces.

Exact spectral heat semigroup on the flat torus, Morrey norms with
brute-force-verifiable ball covers, mild-solution evolution of semilinear
heat inequalities with blow-up detection, and a harmonic-map-flow
sub-simulator with fixed-point and energy diagnostics.
"""

from .errors import *  # noqa: F401,F403
from .fitting import RateFit, fit_power_law
from .geometry import BallCover, TorusGeometry, distance, dyadic_radii, make_ball_cover
from .heat import (
    SpectralPropagator,
    fit_gaussian_bounds,
    gradient_estimate_check,
    gradient_propagate,
    kernel_eval,
    smoothing_exponent,
)
from .morrey import (
    MorreyContext,
    MorreyParams,
    ScalarField,
    check_embedding,
    lp_norm,
    morrey_norm,
    morrey_norm_report,
    sup_ls_on_unit_balls,
)

__version__ = "0.1.0"
