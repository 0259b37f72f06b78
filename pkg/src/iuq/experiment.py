"""Coverage experiments: synthesize data from known inputs, build CIs, aggregate.

Trial ``t`` draws its datasets from ``["trial", t, "data", "input", i]`` and
its simulation runs from ``["trial", t, "sim", ...]``, so a trial is a pure
function of the configuration and ``t``.  Trials may run in worker
processes; aggregation is always in trial order.
"""

from __future__ import annotations

import csv
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .allocation import allocate, practical_ratio, theoretical_ratio
from .ci import SmallSubsampleWarning, ci_nonsplitting, ci_splitting
from .empirical import Generator, InputCollection, generate_dataset, parse_generator
from .errors import InvalidInputError, InvalidParameterError
from .estimator import EstimatorConfig
from .model import SimulationModel, make_model, simulate_cells
from .randomness import RngStream, derive_stream

_TRUTH_CHUNK = 100_000


@dataclass(frozen=True)
class TruthEstimate:
    value: float
    stderr: float
    runs: int


def estimate_truth(model: SimulationModel, generators: Sequence, runs: int, stream: RngStream) -> TruthEstimate:
    """Mean of ``runs`` replications at the true input distributions, streams ``["run", k]``."""
    if runs < 1:
        raise InvalidParameterError(f"need runs >= 1, got {runs}")
    parts, parts_sq = [], []
    for start in range(0, runs, _TRUTH_CHUNK):
        k = np.arange(start, min(start + _TRUTH_CHUNK, runs))
        y = simulate_cells(model, list(generators), stream.child_keys(["run", k]))
        parts.append(math.fsum(y))
        parts_sq.append(math.fsum(y * y))
    total, total_sq = math.fsum(parts), math.fsum(parts_sq)
    mean = total / runs
    if runs > 1:
        var = max(total_sq - runs * mean * mean, 0.0) / (runs - 1)
        se = math.sqrt(var / runs)
    else:
        se = math.nan
    return TruthEstimate(mean, se, runs)


@dataclass(frozen=True)
class ExperimentConfig:
    generators: tuple
    sizes: tuple
    trials: int = 1000
    mode: str = "split"
    N: int = 1500
    theta: str = "practical:30"
    B: Optional[int] = None
    R: Optional[int] = None
    alpha: float = 0.05
    truth: Optional[float] = None  # None: estimate by a pre-pass of truth_runs replications
    truth_runs: int = 1_000_000
    seed: int = 0
    model: str = "mm1"
    model_params: tuple = (("num_customers", 20), ("threshold", 2.0))
    split_fraction: float = 2.0 / 3.0
    inner_multiplier: float = 1.0
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "generators",
                           tuple(parse_generator(g) if isinstance(g, str) else g for g in self.generators))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "model_params", tuple(dict(self.model_params).items()))
        if self.trials < 1:
            raise InvalidParameterError("trials must be >= 1")
        if len(self.generators) != len(self.sizes):
            raise InvalidParameterError("need one generator per dataset size")
        if self.mode not in ("split", "nosplit"):
            raise InvalidParameterError(f"mode must be split or nosplit, got {self.mode!r}")
        if (self.B is None) != (self.R is None):
            raise InvalidParameterError("give both B and R or neither")
        if self.build_model().arity != len(self.sizes):
            raise InvalidParameterError("generator count must equal the model's arity")

    def build_model(self) -> SimulationModel:
        return make_model(self.model, **dict(self.model_params))

    @property
    def n_bar(self) -> float:
        return sum(self.sizes) / len(self.sizes)

    @property
    def size_label(self) -> str:
        return ",".join(f"n_{i}={n}" for i, n in enumerate(self.sizes, start=1))


@dataclass(frozen=True)
class Design:
    B: int
    R: int
    theta: float
    point_budget: int  # 0 in non-splitting mode


def _theta_for(rule: str, sizes: Sequence[int], n_var: int) -> float:
    kind, _, param = rule.partition(":")
    if kind == "practical":
        return practical_ratio(sizes, int(param) if param else 30)
    if kind == "theoretical":
        return theoretical_ratio(n_var, sum(sizes) / len(sizes))
    if kind == "fixed":
        return float(Fraction(param))
    try:
        return float(Fraction(rule))
    except ValueError:
        raise InvalidParameterError(f"unknown theta rule {rule!r}") from None


def resolve_design(cfg: ExperimentConfig) -> Design:
    """Concrete (B, R, theta, point budget) for a configuration.

    The theoretical ratio uses the budget of the two-layer loop (B*R), not N.
    """
    if cfg.B is not None:
        n_var = cfg.B * cfg.R
    elif cfg.mode == "split":
        n_var = math.floor(cfg.split_fraction * cfg.N + 0.5)
    else:
        n_var = cfg.N
    theta = _theta_for(cfg.theta, cfg.sizes, n_var)
    if cfg.B is not None:
        B, R = cfg.B, cfg.R
    else:
        plan = allocate(n_var, theta, cfg.n_bar, cfg.inner_multiplier)
        B, R = plan.B, plan.R
    if cfg.mode == "split":
        point = cfg.N - n_var
        if point < 2:
            raise InvalidParameterError(f"splitting leaves {point} runs for the point estimate")
    else:
        point = 0
        if B * R > cfg.N:
            raise InvalidParameterError(f"B*R = {B * R} exceeds N = {cfg.N}")
    EstimatorConfig(B, R, theta)
    return Design(B, R, theta, point)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    center: float
    halfwidth: float
    lo: float
    hi: float
    sigma2_raw: float
    sigma_i2_used: float
    sigma_s2_used: float
    truncated: bool
    covered: bool
    ratio: float


def run_trial(cfg: ExperimentConfig, design: Design, t: int, truth: float) -> TrialRecord:
    datasets = [
        generate_dataset(gen, n, derive_stream(cfg.seed, ["trial", t, "data", "input", i]), i)
        for i, (gen, n) in enumerate(zip(cfg.generators, cfg.sizes), start=1)
    ]
    data = InputCollection(datasets)
    model = cfg.build_model()
    sim = derive_stream(cfg.seed, ["trial", t, "sim"])
    var_cfg = EstimatorConfig(design.B, design.R, design.theta)
    if cfg.mode == "split":
        ci = ci_splitting(data, model, var_cfg, design.point_budget, cfg.alpha, sim)
    else:
        ci = ci_nonsplitting(data, model, var_cfg, cfg.alpha, sim, warn=False)
    return TrialRecord(
        trial=t,
        center=ci.center,
        halfwidth=ci.halfwidth,
        lo=ci.lo,
        hi=ci.hi,
        sigma2_raw=ci.sigma2_raw,
        sigma_i2_used=ci.sigma_i2_used,
        sigma_s2_used=ci.sigma_s2_used,
        truncated=ci.was_truncated,
        covered=ci.contains(truth),
        ratio=ci.sigma_ratio,
    )


def _run_range(cfg: ExperimentConfig, design: Design, truth: float, trials: range) -> list:
    return [run_trial(cfg, design, t, truth) for t in trials]


@dataclass(frozen=True)
class CoverageReport:
    coverage: float
    mean_length: float
    std_length: float
    ratio_sigma: float
    neg_var_count: int
    bias: float
    trials: int
    truth: float
    truth_stderr: float
    label: str = ""
    sizes: str = ""
    mode: str = ""
    B: int = 0
    R: int = 0
    theta: float = 0.0
    point_budget: int = 0
    N: int = 0
    alpha: float = 0.0
    seed: int = 0
    records: tuple = field(default=(), repr=False, compare=False)


REPORT_FIELDS = [f.name for f in fields(CoverageReport) if f.name != "records"]


def aggregate(records: Sequence[TrialRecord], truth: float, truth_stderr: float = 0.0,
              cfg: Optional[ExperimentConfig] = None, design: Optional[Design] = None) -> CoverageReport:
    n = len(records)
    lengths = np.array([2.0 * r.halfwidth for r in records])
    mean_length = math.fsum(lengths) / n
    std_length = math.sqrt(math.fsum((lengths - mean_length) ** 2) / (n - 1)) if n > 1 else 0.0
    ratios = [r.ratio for r in records if not math.isnan(r.ratio)]
    echo = {}
    if cfg is not None and design is not None:
        echo = dict(label=cfg.label, sizes=",".join(map(str, cfg.sizes)), mode=cfg.mode, B=design.B,
                    R=design.R, theta=design.theta, point_budget=design.point_budget, N=cfg.N,
                    alpha=cfg.alpha, seed=cfg.seed)
    return CoverageReport(
        coverage=sum(r.covered for r in records) / n,
        mean_length=mean_length,
        std_length=std_length,
        ratio_sigma=math.fsum(ratios) / len(ratios) if ratios else math.nan,
        neg_var_count=sum(r.sigma2_raw < 0 for r in records),
        bias=math.fsum(r.center for r in records) / n - truth,
        trials=n,
        truth=truth,
        truth_stderr=truth_stderr,
        records=tuple(records),
        **echo,
    )


def run_coverage_experiment(cfg: ExperimentConfig, workers: int = 1,
                            trace: Union[str, os.PathLike, None] = None) -> CoverageReport:
    design = resolve_design(cfg)
    if cfg.mode == "nosplit":
        s_min = min(math.floor(design.theta * n) for n in cfg.sizes)
        if s_min < math.sqrt(cfg.n_bar):
            warnings.warn(f"{cfg.size_label}: smallest subsample {s_min} < sqrt(n_bar); "
                          "non-splitting point estimates may be biased", SmallSubsampleWarning, stacklevel=2)
    if cfg.truth is None:
        est = estimate_truth(cfg.build_model(), cfg.generators, cfg.truth_runs, derive_stream(cfg.seed, ["truth"]))
        truth, truth_se = est.value, est.stderr
    else:
        truth, truth_se = float(cfg.truth), 0.0
    if workers <= 1:
        records = _run_range(cfg, design, truth, range(cfg.trials))
    else:
        step = math.ceil(cfg.trials / (4 * workers))
        chunks = [range(a, min(a + step, cfg.trials)) for a in range(0, cfg.trials, step)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_range, [cfg] * len(chunks), [design] * len(chunks),
                             [truth] * len(chunks), chunks)
            records = [rec for part in parts for rec in part]
    if trace is not None:
        write_trace(records, trace)
    return aggregate(records, truth, truth_se, cfg, design)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_trace(records: Sequence[TrialRecord], path: Union[str, os.PathLike]) -> None:
    names = [f.name for f in fields(TrialRecord)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for r in records:
                w.writerow([_fmt(getattr(r, n)) for n in names])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc


def write_report(reports: Union[CoverageReport, Iterable[CoverageReport]], path: Union[str, os.PathLike],
                 append: bool = False) -> None:
    """CSV with a fixed header; appending to a nonempty file adds rows only."""
    if isinstance(reports, CoverageReport):
        reports = [reports]
    try:
        need_header = not append or not os.path.exists(path) or os.path.getsize(path) == 0
        with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if need_header:
                w.writerow(REPORT_FIELDS)
            for rep in reports:
                w.writerow([_fmt(getattr(rep, n)) for n in REPORT_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def read_report(path: Union[str, os.PathLike]) -> list[CoverageReport]:
    types = {f.name: f.type for f in fields(CoverageReport)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for name, text in row.items():
                kind = types[name]
                kw[name] = int(text) if kind == "int" else float(text) if kind == "float" else text
            out.append(CoverageReport(**kw))
    return out


def format_table(reports: Sequence[CoverageReport]) -> str:
    """Plain-text table in the layout of a coverage study."""
    head = ["input data sizes", "coverage", "mean CI length", "std. CI length", "sigma_I/sigma_S",
            "E[psi]-psi", "# neg var"]
    rows = []
    for r in reports:
        sizes = ",".join(f"n_{i}={n}" for i, n in enumerate(r.sizes.split(","), start=1)) if r.sizes else r.label
        rows.append([sizes, f"{100 * r.coverage:.1f}%", f"{r.mean_length:.3f}", f"{r.std_length:.3f}",
                     f"{r.ratio_sigma:.2f}", f"{r.bias:.3f}", str(r.neg_var_count)])
    widths = [max(len(x) for x in col) for col in zip(head, *rows)]
    line = lambda cells: " | ".join(c.ljust(w) for c, w in zip(cells, widths))
    return "\n".join([line(head), "-+-".join("-" * w for w in widths)] + [line(r) for r in rows])


def parse_config(text: str) -> ExperimentConfig:
    """Flat ``key=value`` lines; ``#`` starts a comment; generators as ``gen1=exp:0.5``."""
    gens: dict[int, str] = {}
    kw: dict = {}
    params: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise InvalidInputError(f"line {lineno}: expected key=value, got {raw!r}")
        if key.startswith("gen") and key[3:].isdigit():
            gens[int(key[3:])] = value
        elif key == "sizes":
            kw["sizes"] = tuple(int(x) for x in value.split(","))
        elif key in ("mode", "theta", "model", "label"):
            kw[key] = value
        elif key in ("B", "R", "N", "trials", "truth_runs", "seed"):
            kw[key] = int(value)
        elif key in ("alpha", "inner_multiplier"):
            kw[key] = float(value)
        elif key == "split_fraction":
            kw[key] = float(Fraction(value))
        elif key == "truth":
            kw[key] = None if value == "estimate" else float(value)
        elif key == "customers":
            params["num_customers"] = int(value)
        elif key == "threshold":
            params["threshold"] = float(value)
        elif key == "exact":
            params["exact"] = value.lower() in ("1", "true", "yes")
        else:
            raise InvalidInputError(f"line {lineno}: unknown key {key!r}")
    if sorted(gens) != list(range(1, len(gens) + 1)):
        raise InvalidInputError("generators must be numbered gen1..genm without gaps")
    kw["generators"] = tuple(gens[i] for i in sorted(gens))
    if kw.get("model", "mm1") == "mm1":
        params = {"num_customers": 20, "threshold": 2.0, **params}
    kw["model_params"] = tuple(params.items())
    return ExperimentConfig(**kw)


def load_config(path: Union[str, os.PathLike]) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
