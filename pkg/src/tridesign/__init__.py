"""Best linear unbiased estimation and optimal designs for regression with triangular-kernel errors."""

from .basis import (Component, GramRank, RegressionBasis, affine_shift, custom_basis,
                    derivative_gram, gram_rank, numerical_rank, polynomial_basis, trig_basis)
from .continuous_blue import (ContinuousBlue, InterceptBlue, SignedMeasure, blue_general_kernel,
                              c_matrix, degenerate_f0_zero, degenerate_intercept,
                              degenerate_no_intercept, signed_measure, verify_blue_condition)
from .design_search import (DesignObjective, PsoConfig, SearchResult, equidistant_design,
                            optimize_design, polish)
from .discrete_estimator import (LinearEstimator, apply_estimator, check_unbiased, efficiency_1d,
                                 efficiency_multi, mse_star_trace, mse_trace, optimal_weights_1d,
                                 optimal_weights_multi, phi_criterion, phi_upper_bound,
                                 star_estimator)
from .domain import Design, Interval
from .errors import *  # noqa: F401,F403
from .finite_blue import WlseResult, design_matrix, determinant_efficiency, efficiency_of, wlse_estimate, wlse_trace, wlse_variance
from .kernel import (TransformedModel, TriangularKernel, brownian, covariance_matrix, custom,
                     doob_transform, exponential, map_design_back, map_design_forward)
from .montecarlo import (MseReport, SimulationPlan, batch_means, decomposition_check,
                         empirical_mse, mse_report, sample_observations, simulate_estimates)

__version__ = "0.1.0"
