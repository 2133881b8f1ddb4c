"""boxcascade: asymptotics and simulation of nested-box occupancy schemes.

A splitting law recursively divides a unit mass among the children of an
infinite tree; throwing n balls into the resulting nested boxes defines a
height (first generation where every box holds fewer than j balls) and a
saturation level (first generation where some box does).  This package
computes the exact logarithmic growth constants of both quantities from the
law's Laplace transform, and simulates the scheme at scale to verify them,
including the integer phase transition of the height constant.
"""

from . import backend
from .cascade import (CascadeEnvironment, GenerationStats, OccupancyState,
                      biggins_check, build_environment, generation_stats,
                      height, height_and_saturation, heights_multi,
                      martingale_step_check, mass_extremes_beam,
                      mass_extremes_by_generation, poisson_tail, saturation,
                      throw_balls, throw_balls_per_ball)
from .constants import (CriticalConstants, CriticalExponents, check_hypotheses,
                        compute_constants, critical_exponents, height_constant,
                        limit_constants, saturation_constant, tangent_intercept)
from .errors import (BoxCascadeError, BudgetExceededError, EstimateDivergedError,
                     InconclusiveRootError, LatticeLawError, ProfileDomainError,
                     StabilizationError, UnsupportedRegimeError)
from .experiments import (ExperimentConfig, SlopeEstimate, SpacingResult, Table,
                          emit, fit_loglinear, phase_scan, read_table,
                          slope_run, spacing_experiment)
from .laws import (KeyedStream, LaplaceProfile, LaplaceValues, MassVector,
                   SplittingLaw, dirac_half, heavytail, laplace_eval, law_075u,
                   masses_from_uniforms, parse_law_spec, sample_split,
                   two_three_mixture, uniform_stick)

__version__ = "0.1.0"
