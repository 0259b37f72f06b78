"""Two-layer resampling and the ANOVA between-minus-within variance estimator.

The full-size variance bootstrap is the subsampled one run at ``theta = 1``;
both go through :func:`two_layer_replications`, so they agree bit for bit
under a shared seed.

Stream layout below a root stream:

* ``["b", b, "input", i]`` -- the resample of input ``i`` for outer group ``b``
* ``["b", b, "r", r]``     -- replication ``r`` of outer group ``b``

``b`` and ``r`` count from 0, ``i`` from 1.  Changing ``B`` or ``R`` leaves
the numbers of every other cell untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .empirical import InputCollection, resample_block, subsample_sizes
from .errors import InvalidInputError, InvalidParameterError
from .model import SimulationModel, simulate_cells
from .randomness import RngStream, as_stream

# elements of the (B, R, draws) uniform block generated at once
_BLOCK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class EstimatorConfig:
    B: int
    R: int
    theta: float = 1.0
    target: Optional[int] = None  # None: all input models; i: only model i is resampled

    def __post_init__(self):
        if self.B < 2:
            raise InvalidParameterError(f"need B >= 2, got {self.B}")
        if self.R < 2:
            raise InvalidParameterError(f"need R >= 2, got {self.R}")
        if not 0.0 < self.theta <= 1.0:
            raise InvalidParameterError(f"subsample ratio must lie in (0, 1], got {self.theta!r}")

    @property
    def budget(self) -> int:
        return self.B * self.R


@dataclass(frozen=True)
class VarianceEstimate:
    sigma2: float
    within_group_v: float
    group_means: np.ndarray = field(repr=False)
    grand_mean: float
    budget_used: int
    theta: float
    target: Optional[int]
    R: int
    subsample_sizes: tuple = ()

    @property
    def B(self) -> int:
        return len(self.group_means)

    @property
    def between_group(self) -> float:
        return between_group_variance(self.group_means)

    @property
    def negative(self) -> bool:
        return self.sigma2 < 0

    def recomputed_sigma2(self) -> float:
        return self.theta * between_minus_within(self.group_means, self.within_group_v, self.R)


def between_group_variance(group_means: Sequence[float]) -> float:
    g = np.asarray(group_means, dtype=np.float64)
    if g.size < 2:
        raise InvalidParameterError(f"need at least 2 groups, got {g.size}")
    center = math.fsum(g) / g.size
    return math.fsum((g - center) ** 2) / (g.size - 1)


def between_minus_within(group_means: Sequence[float], v: float, r: int) -> float:
    """``1/(B-1) sum_b (mean_b - grand)^2 - v/r``; may be negative."""
    if r < 2:
        raise InvalidParameterError(f"need r >= 2, got {r}")
    if v < 0:
        raise InvalidParameterError(f"within-group variance must be >= 0, got {v}")
    return between_group_variance(group_means) - v / r


def _group_sums(y: np.ndarray) -> tuple[np.ndarray, float]:
    """Group means and the total within-group sum of squares of a (B, R) block."""
    means = y.sum(axis=1) / y.shape[1]
    ss = ((y - means[:, None]) ** 2).sum(axis=1)
    return means, ss


def within_group_variance(replications) -> float:
    """Pooled within-group variance ``1/(B(R-1)) sum_b sum_r (y_br - mean_b)^2``."""
    y = np.asarray(replications, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 1:
        raise InvalidInputError("replications must be a B x R matrix with B >= 1")
    B, R = y.shape
    if R < 2:
        raise InvalidParameterError(f"need R >= 2, got {R}")
    _, ss = _group_sums(y)
    return math.fsum(ss) / (B * (R - 1))


def _resampled_inputs(data: InputCollection, cfg: EstimatorConfig, root: RngStream, b: np.ndarray):
    targets = range(1, data.m + 1) if cfg.target is None else (cfg.target,)
    sizes = dict(zip(targets, subsample_sizes(cfg.theta, [data[i].n for i in targets])))
    dists = []
    for ds in data:
        i = ds.model_index
        if i in sizes:
            keys = root.child_keys(["b", b, "input", i])
            dists.append(resample_block(ds, sizes[i], keys))
        else:
            dists.append(ds.distribution())
    return dists, tuple(sizes[i] for i in targets)


def _validate(data: InputCollection, model: SimulationModel, cfg: EstimatorConfig) -> None:
    if model.arity != data.m:
        raise InvalidInputError(f"model takes {model.arity} inputs, data has {data.m}")
    if cfg.target is not None and not 1 <= cfg.target <= data.m:
        raise InvalidParameterError(f"target model {cfg.target} outside 1..{data.m}")


def two_layer_replications(data: InputCollection, model: SimulationModel, cfg: EstimatorConfig,
                           seed: Union[int, RngStream]) -> np.ndarray:
    """The ``(B, R)`` matrix of replications driven by the outer resamples."""
    _validate(data, model, cfg)
    root = as_stream(seed)
    out = np.empty((cfg.B, cfg.R))
    per_group = cfg.R * max(model.draws_per_replication, 1)
    step = max(1, _BLOCK_ELEMENTS // per_group)
    r = np.arange(cfg.R)
    for start in range(0, cfg.B, step):
        b = np.arange(start, min(start + step, cfg.B))
        dists, _ = _resampled_inputs(data, cfg, root, b)
        keys = root.child_keys(["b", b[:, None], "r", r[None, :]])
        out[b] = simulate_cells(model, dists, keys)
    return out


def estimate_from_replications(y: np.ndarray, theta: float = 1.0, target=None, sizes=()) -> VarianceEstimate:
    y = np.asarray(y, dtype=np.float64)
    B, R = y.shape
    means, ss = _group_sums(y)
    v = math.fsum(ss) / (B * (R - 1))
    sigma2 = theta * between_minus_within(means, v, R)
    return VarianceEstimate(
        sigma2=sigma2,
        within_group_v=v,
        group_means=means,
        grand_mean=math.fsum(means) / B,
        budget_used=B * R,
        theta=theta,
        target=target,
        R=R,
        subsample_sizes=tuple(sizes),
    )


def _estimate(data, model, cfg, seed) -> VarianceEstimate:
    _validate(data, model, cfg)
    targets = range(1, data.m + 1) if cfg.target is None else (cfg.target,)
    sizes = subsample_sizes(cfg.theta, [data[i].n for i in targets])
    y = two_layer_replications(data, model, cfg, seed)
    return estimate_from_replications(y, cfg.theta, cfg.target, sizes)


def subsampled_variance_bootstrap(data: InputCollection, model: SimulationModel, cfg: EstimatorConfig,
                                  seed: Union[int, RngStream]) -> VarianceEstimate:
    """Resample every input at size ``floor(theta n_i)`` and rescale by ``theta``.

    Estimates the overall input variance sum_i sigma_i^2 / n_i.
    """
    if cfg.target is not None:
        raise InvalidParameterError("use subsampled_variance_single for a single-model target")
    return _estimate(data, model, cfg, seed)


def variance_bootstrap(data: InputCollection, model: SimulationModel, cfg: EstimatorConfig,
                       seed: Union[int, RngStream]) -> VarianceEstimate:
    """Full-size variance bootstrap (``theta = 1``)."""
    if cfg.theta != 1.0:
        raise InvalidParameterError(f"variance_bootstrap runs at theta = 1, got {cfg.theta}")
    return subsampled_variance_bootstrap(data, model, cfg, seed)


def subsampled_variance_single(data: InputCollection, model: SimulationModel, i: int, cfg: EstimatorConfig,
                               seed: Union[int, RngStream]) -> VarianceEstimate:
    """Variance contribution of input ``i`` alone; the other inputs stay at their full data."""
    if not 1 <= i <= data.m:
        raise InvalidParameterError(f"model index {i} outside 1..{data.m}")
    return _estimate(data, model, replace(cfg, target=i), seed)


def truncate_nonnegative(est: Union[VarianceEstimate, float]) -> float:
    sigma2 = est.sigma2 if isinstance(est, VarianceEstimate) else float(est)
    return max(sigma2, 0.0)
