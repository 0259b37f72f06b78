"""Input data, empirical distributions and with-replacement resampling.

All distributions here share one sampling contract: ``sample(u)`` maps an
array of uniforms to variates of the same shape, one uniform per variate.
Finite-support distributions carry a leading batch axis so that the ``B``
resampled distributions of an outer loop can drive a whole ``(B, R, k)``
block of uniforms in one call.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import InvalidInputError, InvalidParameterError, SubsampleTooSmallError
from .normal import normal_quantile
from .randomness import RngStream, exponential_from_uniform, uniform_block


def _indices(u: np.ndarray, n: int) -> np.ndarray:
    idx = (np.asarray(u) * n).astype(np.intp)
    # u < 1 always, but u*n may round up to n in floating point
    return np.minimum(idx, n - 1)


class Empirical:
    """One or more equally weighted finite supports, ``values`` of shape (batch, size)."""

    def __init__(self, values):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[None, :]
        if values.ndim != 2 or values.shape[1] == 0:
            raise InvalidInputError("empirical distribution needs a nonempty support")
        self.values = values

    @property
    def batch(self) -> int:
        return self.values.shape[0]

    @property
    def size(self) -> int:
        return self.values.shape[1]

    def sample(self, u) -> np.ndarray:
        """Uniformly chosen stored values; axis 0 of ``u`` indexes the batch when batch > 1."""
        u = np.asarray(u, dtype=np.float64)
        idx = _indices(u, self.size)
        if self.batch == 1:
            return self.values[0][idx]
        if u.shape[0] != self.batch:
            raise InvalidInputError(f"uniform block has leading size {u.shape[0]}, batch is {self.batch}")
        offset = (np.arange(self.batch) * self.size).reshape((-1,) + (1,) * (u.ndim - 1))
        return np.take(self.values.ravel(), offset + idx)

    def mean(self) -> np.ndarray:
        return self.values.mean(axis=1)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0 or not math.isfinite(self.rate):
            raise InvalidParameterError(f"exponential rate must be positive, got {self.rate!r}")

    def sample(self, u) -> np.ndarray:
        return exponential_from_uniform(np.asarray(u, dtype=np.float64), self.rate)

    def mean(self) -> np.ndarray:
        return np.array([1.0 / self.rate])

    def variance(self) -> float:
        return 1.0 / self.rate**2


@dataclass(frozen=True)
class Uniform:
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise InvalidParameterError("uniform needs high > low")

    def sample(self, u) -> np.ndarray:
        return self.low + (self.high - self.low) * np.asarray(u, dtype=np.float64)

    def mean(self) -> np.ndarray:
        return np.array([0.5 * (self.low + self.high)])

    def variance(self) -> float:
        return (self.high - self.low) ** 2 / 12.0


@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise InvalidParameterError("normal needs sd > 0")

    def sample(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        # a zero uniform has no finite quantile; nudge it to the smallest positive draw
        u = np.where(u == 0.0, 2.0**-53, u)
        return self.mu + self.sd * normal_quantile(u)

    def mean(self) -> np.ndarray:
        return np.array([self.mu])

    def variance(self) -> float:
        return self.sd**2


@dataclass(frozen=True)
class Constant:
    value: float

    def sample(self, u) -> np.ndarray:
        return np.full(np.shape(u), float(self.value))

    def mean(self) -> np.ndarray:
        return np.array([float(self.value)])

    def variance(self) -> float:
        return 0.0


Generator = Union[Exponential, Uniform, Normal, Constant]


def parse_generator(text: str) -> Generator:
    """``exp:0.5``, ``uniform:0:1``, ``normal:0:1`` or ``const:3``."""
    kind, *params = text.strip().split(":")
    try:
        args = [float(p) for p in params]
        if kind in ("exp", "exponential"):
            return Exponential(*args)
        if kind == "uniform":
            return Uniform(*args)
        if kind == "normal":
            return Normal(*args)
        if kind in ("const", "constant"):
            return Constant(*args)
    except TypeError as exc:
        raise InvalidParameterError(f"bad generator parameters in {text!r}") from exc
    raise InvalidParameterError(f"unknown generator {text!r}")


@dataclass(frozen=True)
class Dataset:
    """Observed data for one input model (``model_index`` counts from 1)."""

    model_index: int
    observations: np.ndarray = field(repr=False)

    def __post_init__(self):
        obs = np.array(self.observations, dtype=np.float64).ravel()
        if obs.size == 0:
            raise InvalidInputError(f"dataset {self.model_index} is empty")
        if not np.all(np.isfinite(obs)):
            raise InvalidInputError(f"dataset {self.model_index} has non-finite observations")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)

    @property
    def n(self) -> int:
        return self.observations.size

    def distribution(self) -> Empirical:
        return Empirical(self.observations)


@dataclass(frozen=True)
class ResampledDistribution:
    source: Dataset = field(repr=False)
    values: np.ndarray

    @property
    def s(self) -> int:
        return self.values.size

    def distribution(self) -> Empirical:
        return Empirical(self.values)


class InputCollection:
    """The ``m`` independent input datasets, indexed 1..m."""

    def __init__(self, datasets: Sequence[Union[Dataset, Sequence[float], np.ndarray]]):
        items = []
        for i, ds in enumerate(datasets, start=1):
            if not isinstance(ds, Dataset):
                ds = Dataset(i, ds)
            elif ds.model_index != i:
                raise InvalidInputError(f"dataset at position {i} has model_index {ds.model_index}")
            items.append(ds)
        if not items:
            raise InvalidInputError("need at least one dataset")
        self.datasets: tuple[Dataset, ...] = tuple(items)

    def __len__(self) -> int:
        return len(self.datasets)

    def __iter__(self) -> Iterator[Dataset]:
        return iter(self.datasets)

    def __getitem__(self, model_index: int) -> Dataset:
        if not 1 <= model_index <= len(self.datasets):
            raise InvalidParameterError(f"model index {model_index} outside 1..{len(self.datasets)}")
        return self.datasets[model_index - 1]

    @property
    def m(self) -> int:
        return len(self.datasets)

    @property
    def sizes(self) -> list[int]:
        return [ds.n for ds in self.datasets]

    @property
    def n_bar(self) -> float:
        return float(np.mean(self.sizes))

    @classmethod
    def from_files(cls, paths: Sequence[Union[str, os.PathLike]]) -> "InputCollection":
        return cls([load_dataset(p, i) for i, p in enumerate(paths, start=1)])


def load_dataset(path: Union[str, os.PathLike], model_index: int = 1) -> Dataset:
    """One real per line, blank lines ignored."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return Dataset(model_index, values)


def save_dataset(dataset: Dataset, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x in dataset.observations.tolist():
            fh.write(f"{x!r}\n")


def generate_dataset(generator: Generator, n: int, stream: RngStream, model_index: int = 1) -> Dataset:
    """``n`` i.i.d. observations from a known generator; consumes ``n`` draws."""
    return Dataset(model_index, generator.sample(stream.uniforms(n)))


def subsample_sizes(theta: float, sizes: Sequence[int]) -> list[int]:
    """``floor(theta * n_i)`` for each size; rejects zero-size subsamples."""
    if not 0.0 < theta <= 1.0:
        raise InvalidParameterError(f"subsample ratio must lie in (0, 1], got {theta!r}")
    out = []
    for n in sizes:
        if n < 1:
            raise InvalidInputError(f"data sizes must be >= 1, got {n}")
        s = math.floor(theta * n)
        if s < 1:
            raise SubsampleTooSmallError(f"theta={theta} gives floor({theta}*{n}) = 0")
        out.append(s)
    return out


def resample(dataset: Dataset, s: int, stream: RngStream) -> ResampledDistribution:
    """``s`` values drawn uniformly with replacement; consumes ``s`` draws."""
    if s < 1:
        raise InvalidParameterError(f"resample size must be >= 1, got {s}")
    if dataset.n == 0:
        raise InvalidInputError("cannot resample an empty dataset")
    idx = _indices(stream.uniforms(s), dataset.n)
    return ResampledDistribution(dataset, dataset.observations[idx])


def resample_block(dataset: Dataset, s: int, keys: np.ndarray) -> Empirical:
    """Vectorized :func:`resample`: one size-``s`` resample per stream key.

    Row ``b`` equals ``resample(dataset, s, RngStream(keys[b])).values``.
    """
    idx = _indices(uniform_block(keys, s), dataset.n)
    return Empirical(dataset.observations[idx])


def as_distribution(dist):
    if isinstance(dist, (Dataset, ResampledDistribution)):
        return dist.distribution()
    if isinstance(dist, (list, tuple, np.ndarray)):
        return Empirical(dist)
    return dist


def draw_variate(dist, stream: RngStream) -> float:
    """One draw from a dataset, resample or generator; consumes one uniform."""
    return float(as_distribution(dist).sample(stream.uniforms(1))[0])
