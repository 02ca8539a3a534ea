"""Fold-fold singularities in two-zone Filippov systems with a slow variable.

Locates fold-fold points, evaluates the closed-form coefficients that
predict the small limit cycle born there, and checks those predictions
against event-detecting simulations.
"""

__version__ = "0.1.0"

from .bifurcation import (
    BifurcationCoefficients,
    FoldFoldPoint,
    TheoremVerdict,
    check_theorem,
    compute_coefficients,
    find_foldfold,
    foldfold_residual,
    predict_fixed_points,
    predict_period,
    predict_transit_times,
    predict_z_offset,
)
from .config import RunConfig, load_config, parse_config
from .errors import *  # noqa: F401,F403
from .glacial import GlacialParams, build_general_system, insolation_Q, obliquity_s2, preset
from .integrator import IntegrationOptions, Trajectory, flow_to_section, integrate
from .poincare import LimitCycle, find_cycle, fit_timemap, half_map, measure_cycle
from .synthetic import SyntheticSpec, build_synthetic, planted_point, synthetic_spec
from .system import MINUS, PLUS, PiecewiseSystem, State, SurfaceParams
