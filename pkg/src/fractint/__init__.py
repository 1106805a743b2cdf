"""Discretized fractal intersections, exceptional sets and lattice counts near spheres."""

__version__ = "0.1.0"

from ._kernels import BACKEND  # noqa: E402
from .grid import (  # noqa: E402
    CellSet, DiscreteMeasure, GridError, GridSpec, ScaleTooFine, ad_regularity_check, ball_mass,
    dilate, make_grid, transform, uniform_measure,
)
from .estimators import (  # noqa: E402
    DecayFit, box_count, energy_fourier, energy_spatial, fourier_decay, hyperplane_exponent,
    minkowski_dim,
)
from .maps import MapSpec, phong_stein_det  # noqa: E402
from .thresholds import Thresholds, predict  # noqa: E402
