"""Input uncertainty quantification for stochastic simulation.

Variance bootstrap and proportionate subsampled variance bootstrap
estimators of the input-induced output variance, budget allocation rules,
and confidence intervals that combine input and simulation noise.
"""

from .allocation import (AllocationPlan, allocate, plan_budget, practical_ratio, theoretical_inner_size,
                         theoretical_ratio, validate_consistency_regime)
from .ci import ConfidenceInterval, ci_nonsplitting, ci_splitting, normal_interval, normal_quantile
from .empirical import (Constant, Dataset, Empirical, Exponential, InputCollection, Normal,
                        ResampledDistribution, Uniform, draw_variate, generate_dataset, load_dataset,
                        resample, subsample_sizes)
from .errors import BudgetTooSmallError, InvalidInputError, InvalidParameterError, SubsampleTooSmallError
from .estimator import (EstimatorConfig, VarianceEstimate, between_minus_within, subsampled_variance_bootstrap,
                        subsampled_variance_single, truncate_nonnegative, variance_bootstrap,
                        within_group_variance)
from .experiment import (CoverageReport, ExperimentConfig, estimate_truth, load_config, run_coverage_experiment,
                         write_report)
from .model import (AdditiveMeanModel, ConstantModel, MeanFunctional, MM1WaitModel, SimulationModel,
                    lindley_waiting_time, make_model, mm1_replicate, replicate)
from .randomness import RngStream, derive_stream, next_exponential, next_uniform

__version__ = "0.1.0"
