"""Quality measures for scattered point sets: distance norms, good covers,
MLS sampling operators, fooling-function lower bounds and kernel quadrature."""
from .cover import GoodCover, build_good_cover, empty_balls, good_radius, local_fill
from .distance import (GridIndex, NormEstimate, covering_radius, dist_to_set, greedy_separated_subset,
                       lgamma_norm, lgamma_norm_1d_exact)
from .domain import ConeParameters, ConvexDomain
from .errors import (DegenerateConfiguration, GloballyBadPointSet, InputError, NumericalFailure)
from .experiments import (ExperimentConfig, equivalence_study, hole_demo, integration_rate_study,
                          limit_constant, limit_constant_check, random_rate_study)
from .fooling import (BumpFunction, ReferenceNorms, multi_hole_fooling, reference_norms,
                      single_hole_fooling)
from .mls import MLSOperator, approximate, lq_error, mls_weights, rate_study
from .points import PointSet
from .quadrature import (Kernel, QuadratureRule, gram, initial_error_sq, kernel_embedding,
                         optimal_weights, quadrature_rule, worst_case_error)
from .tables import RateTable, loglog_slope
from .testfunctions import TestFunction

__version__ = "0.1.0"
