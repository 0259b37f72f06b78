"""Normal-approximation confidence intervals accounting for input and simulation noise.

``center +- z_{1-alpha/2} * sqrt(sigma_I^2 + sigma_S^2)``, under two budget
protocols:

* splitting: the two-layer loop estimates sigma_I^2 and a separate batch of
  replications at the full empirical inputs gives the point estimate;
* non-splitting: the whole budget goes to the two-layer loop and its grand
  mean doubles as the point estimate (biased when subsamples are small).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .empirical import InputCollection
from .errors import InvalidParameterError
from .estimator import (EstimatorConfig, VarianceEstimate, between_group_variance,
                        subsampled_variance_bootstrap, truncate_nonnegative)
from .model import SimulationModel, simulate_cells
from .normal import normal_quantile
from .randomness import RngStream, as_stream

__all__ = ["ConfidenceInterval", "normal_quantile", "normal_interval", "ci_splitting", "ci_nonsplitting"]


class SmallSubsampleWarning(UserWarning):
    """Non-splitting point estimate with subsamples below sqrt(n_bar)."""


@dataclass(frozen=True)
class ConfidenceInterval:
    center: float
    halfwidth: float
    level: float
    sigma_i2_used: float
    sigma_s2_used: float
    was_truncated: bool
    sigma2_raw: float = 0.0
    budget_used: int = 0
    estimate: Optional[VarianceEstimate] = field(default=None, repr=False, compare=False)

    @property
    def lo(self) -> float:
        return self.center - self.halfwidth

    @property
    def hi(self) -> float:
        return self.center + self.halfwidth

    @property
    def length(self) -> float:
        return 2.0 * self.halfwidth

    @property
    def sigma_ratio(self) -> float:
        """sigma_I / sigma_S with the truncated input variance; nan when sigma_S = 0."""
        if self.sigma_s2_used == 0:
            return math.nan
        return math.sqrt(self.sigma_i2_used / self.sigma_s2_used)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha!r}")


def normal_interval(center: float, sigma_i2: float, sigma_s2: float, alpha: float = 0.05,
                    sigma2_raw: Optional[float] = None, budget_used: int = 0,
                    estimate: Optional[VarianceEstimate] = None) -> ConfidenceInterval:
    """``center +- z * sqrt(max(sigma_i2, 0) + sigma_s2)``."""
    _check_alpha(alpha)
    if sigma_s2 < 0:
        raise InvalidParameterError(f"simulation variance must be >= 0, got {sigma_s2}")
    raw = sigma_i2 if sigma2_raw is None else sigma2_raw
    used = truncate_nonnegative(sigma_i2)
    z = normal_quantile(1.0 - alpha / 2.0)
    return ConfidenceInterval(
        center=center,
        halfwidth=z * math.sqrt(used + sigma_s2),
        level=1.0 - alpha,
        sigma_i2_used=used,
        sigma_s2_used=sigma_s2,
        was_truncated=sigma_i2 < 0,
        sigma2_raw=raw,
        budget_used=budget_used,
        estimate=estimate,
    )


def _as_config(var_budget) -> EstimatorConfig:
    if isinstance(var_budget, EstimatorConfig):
        return var_budget
    B, R, theta = var_budget
    return EstimatorConfig(int(B), int(R), float(theta))


def point_replications(data: InputCollection, model: SimulationModel, count: int,
                       seed: Union[int, RngStream]) -> np.ndarray:
    """``count`` replications at the full empirical inputs, streams ``["point", r]``."""
    root = as_stream(seed)
    keys = root.child_keys(["point", np.arange(count)])
    return simulate_cells(model, [ds.distribution() for ds in data], keys)


def ci_splitting(data: InputCollection, model: SimulationModel, var_budget, point_budget: int,
                 alpha: float = 0.05, seed: Union[int, RngStream] = 0) -> ConfidenceInterval:
    """CI with the budget split between variance estimation and the point estimate.

    sigma_S^2 = (V/2 + tau~^2/2) / point_budget, where V is the estimator's
    within-group variance and tau~^2 the sample variance of the point runs.
    """
    _check_alpha(alpha)
    if point_budget < 2:
        raise InvalidParameterError(f"point-estimate budget must be >= 2, got {point_budget}")
    root = as_stream(seed)
    cfg = _as_config(var_budget)
    est = subsampled_variance_bootstrap(data, model, cfg, root)
    y = point_replications(data, model, point_budget, root)
    center = math.fsum(y) / point_budget
    tau2 = math.fsum((y - center) ** 2) / (point_budget - 1)
    sigma_s2 = (est.within_group_v / 2.0 + tau2 / 2.0) / point_budget
    return normal_interval(center, est.sigma2, sigma_s2, alpha,
                           budget_used=est.budget_used + point_budget, estimate=est)


def ci_nonsplitting(data: InputCollection, model: SimulationModel, var_budget, alpha: float = 0.05,
                    seed: Union[int, RngStream] = 0, warn: bool = True) -> ConfidenceInterval:
    """CI from one two-layer run: center = grand mean, sigma_S^2 = var(group means) / B."""
    _check_alpha(alpha)
    cfg = _as_config(var_budget)
    est = subsampled_variance_bootstrap(data, model, cfg, as_stream(seed))
    if warn and min(est.subsample_sizes) < math.sqrt(data.n_bar):
        warnings.warn(
            f"subsample sizes {est.subsample_sizes} are below sqrt(n_bar) = {math.sqrt(data.n_bar):.1f}; "
            "the non-splitting point estimate may be noticeably biased",
            SmallSubsampleWarning,
            stacklevel=2,
        )
    sigma_s2 = between_group_variance(est.group_means) / cfg.B
    return normal_interval(est.grand_mean, est.sigma2, sigma_s2, alpha,
                           budget_used=est.budget_used, estimate=est)
