"""Simulation-model contract and builtin models.

A model consumes a fixed number of uniforms per replication
(``draws_per_replication``) and maps a block of them, of shape
``(..., draws_per_replication)``, to one replication per leading cell.
The scalar :func:`replicate` is the one-cell special case of the same path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .empirical import as_distribution
from .errors import InvalidInputError, InvalidParameterError
from .randomness import RngStream, uniform_block


class SimulationModel:
    """Base class: subclasses set ``arity`` and ``draws_per_replication``."""

    name = "model"
    arity = 1
    draws_per_replication = 0
    deterministic_given_inputs = False

    def simulate(self, dists: Sequence, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def check_arity(self, dists: Sequence) -> None:
        if len(dists) != self.arity:
            raise InvalidInputError(f"{self.name} takes {self.arity} input distributions, got {len(dists)}")


def _batch_mean(dist, lead_shape: tuple) -> np.ndarray:
    means = np.asarray(dist.mean(), dtype=np.float64)
    if means.size == 1:
        return np.full(lead_shape, means.item())
    return np.broadcast_to(means.reshape((-1,) + (1,) * (len(lead_shape) - 1)), lead_shape)


def lindley_waiting_time(interarrivals: Sequence[float], services: Sequence[float]) -> float:
    """Waiting time of customer T, with W_1 = 0 and W_{t+1} = max(W_t + S_t - A_t, 0)."""
    a = np.asarray(interarrivals, dtype=np.float64)
    s = np.asarray(services, dtype=np.float64)
    if a.shape != s.shape or a.ndim != 1:
        raise InvalidInputError("interarrival and service lists must have equal length")
    if np.any(a < 0) or np.any(s < 0):
        raise InvalidInputError("interarrival and service times must be nonnegative")
    w = 0.0
    for at, st in zip(a.tolist(), s.tolist()):
        w = max(w + st - at, 0.0)
    return w


def lindley_batch(interarrivals: np.ndarray, services: np.ndarray) -> np.ndarray:
    """Vectorized :func:`lindley_waiting_time` over all leading axes."""
    w = np.zeros(interarrivals.shape[:-1])
    for t in range(interarrivals.shape[-1]):
        w = np.maximum(w + services[..., t] - interarrivals[..., t], 0.0)
    return w


@dataclass(frozen=True)
class MM1WaitModel(SimulationModel):
    """Indicator that the waiting time of customer ``num_customers`` exceeds ``threshold``.

    Input 1 is the interarrival distribution, input 2 the service distribution.
    Draws are consumed in lockstep pairs (A_t, S_t), t = 1..T-1.
    """

    num_customers: int = 20
    threshold: float = 2.0

    name = "mm1"
    arity = 2

    def __post_init__(self):
        if self.num_customers < 1:
            raise InvalidParameterError("num_customers must be >= 1")

    @property
    def draws_per_replication(self) -> int:
        return 2 * (self.num_customers - 1)

    def simulate(self, dists, u):
        self.check_arity(dists)
        a = dists[0].sample(u[..., 0::2])
        s = dists[1].sample(u[..., 1::2])
        return (lindley_batch(a, s) > self.threshold).astype(np.float64)


@dataclass(frozen=True)
class MeanFunctional(SimulationModel):
    """psi(F) = E_F[X]; ``exact`` returns the distribution mean without noise."""

    exact: bool = False

    name = "mean"
    arity = 1

    @property
    def draws_per_replication(self) -> int:
        return 0 if self.exact else 1

    @property
    def deterministic_given_inputs(self) -> bool:
        return self.exact

    def simulate(self, dists, u):
        self.check_arity(dists)
        if self.exact:
            return _batch_mean(dists[0], u.shape[:-1])
        return dists[0].sample(u[..., 0])


@dataclass(frozen=True)
class AdditiveMeanModel(SimulationModel):
    """psi(F_1..F_m) = sum_i w_i E_{F_i}[X_i]."""

    weights: tuple = (1.0, 1.0)
    exact: bool = False

    name = "sum"

    @property
    def arity(self) -> int:
        return len(self.weights)

    @property
    def draws_per_replication(self) -> int:
        return 0 if self.exact else self.arity

    @property
    def deterministic_given_inputs(self) -> bool:
        return self.exact

    def simulate(self, dists, u):
        self.check_arity(dists)
        lead = u.shape[:-1]
        out = np.zeros(lead)
        for i, (w, d) in enumerate(zip(self.weights, dists)):
            part = _batch_mean(d, lead) if self.exact else d.sample(u[..., i])
            out = out + w * part
        return out


@dataclass(frozen=True)
class ConstantModel(SimulationModel):
    """Returns ``value`` for every replication regardless of inputs."""

    value: float = 0.0
    inputs: int = 1

    name = "constant"
    draws_per_replication = 0
    deterministic_given_inputs = True

    @property
    def arity(self) -> int:
        return self.inputs

    def simulate(self, dists, u):
        self.check_arity(dists)
        return np.full(u.shape[:-1], float(self.value))


MODELS: dict[str, Callable[..., SimulationModel]] = {}


def register_model(name: str, factory: Callable[..., SimulationModel]) -> None:
    MODELS[name] = factory


def make_model(name: str, **params) -> SimulationModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown model {name!r}; known: {sorted(MODELS)}") from None
    return factory(**params)


register_model("mm1", MM1WaitModel)
register_model("mean", MeanFunctional)
register_model("sum", lambda weights=(1.0, 1.0), exact=False: AdditiveMeanModel(tuple(weights), exact))
register_model("constant", ConstantModel)


def simulate_cells(model: SimulationModel, dists: Sequence, keys: np.ndarray) -> np.ndarray:
    """One replication per stream key; output has the shape of ``keys``."""
    u = uniform_block(keys, model.draws_per_replication)
    return np.asarray(model.simulate(dists, u), dtype=np.float64)


def replicate(model: SimulationModel, dists: Sequence, stream: RngStream) -> float:
    """One unbiased replication; consumes ``model.draws_per_replication`` draws."""
    dists = [as_distribution(d) for d in dists]
    model.check_arity(dists)
    u = stream.uniforms(model.draws_per_replication).reshape(1, -1)
    return float(model.simulate(dists, u)[0])


def mm1_replicate(model: MM1WaitModel, dists: Sequence, stream: RngStream) -> float:
    return replicate(model, dists, stream)
