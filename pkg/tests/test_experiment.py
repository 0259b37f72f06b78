import csv
import math

import numpy as np
import pytest

from iuq.ci import SmallSubsampleWarning, normal_interval
from iuq.empirical import Constant, Exponential, Normal, generate_dataset
from iuq.errors import InvalidInputError, InvalidParameterError
from iuq.experiment import (REPORT_FIELDS, CoverageReport, ExperimentConfig, aggregate, estimate_truth,
                            format_table, parse_config, read_report, resolve_design, run_coverage_experiment,
                            write_report)
from iuq.model import MeanFunctional, MM1WaitModel
from iuq.randomness import derive_stream

SMALL = dict(generators=("exp:0.5", "exp:1"), sizes=(60, 30), trials=12, N=300, truth=0.182, seed=3)


def test_truth_of_degenerate_generator():
    est = estimate_truth(MeanFunctional(exact=True), [Constant(2.5)], 1, derive_stream(0))
    assert est.value == 2.5 and est.runs == 1 and math.isnan(est.stderr)


def test_truth_certain_event():
    est = estimate_truth(MM1WaitModel(20, -1.0), [Exponential(0.5), Exponential(1.0)], 1000, derive_stream(0))
    assert est.value == 1.0 and est.stderr == 0.0


def test_truth_chunks_agree(monkeypatch):
    import iuq.experiment as mod
    gens = [Exponential(0.5), Exponential(1.0)]
    whole = estimate_truth(MM1WaitModel(), gens, 5000, derive_stream(1))
    monkeypatch.setattr(mod, "_TRUTH_CHUNK", 777)
    parts = estimate_truth(MM1WaitModel(), gens, 5000, derive_stream(1))
    assert math.isclose(parts.value, whole.value, rel_tol=1e-15)


def test_truth_rejects_zero_runs():
    with pytest.raises(InvalidParameterError):
        estimate_truth(MM1WaitModel(), [Exponential(0.5), Exponential(1.0)], 0, derive_stream(0))


def test_parse_config():
    cfg = parse_config("""
        # fixed design
        gen1=exp:0.5
        gen2=exp:1
        sizes=200,100
        mode=split
        theta=practical:30
        B=50
        R=20
        N=1500   # total
        alpha=0.05
        trials=1000
        truth=estimate
        split_fraction=2/3
    """)
    assert cfg.sizes == (200, 100) and cfg.B == 50 and cfg.R == 20 and cfg.truth is None
    assert cfg.generators == (Exponential(0.5), Exponential(1.0))
    assert dict(cfg.model_params) == {"num_customers": 20, "threshold": 2.0}
    assert cfg.split_fraction == 2 / 3


@pytest.mark.parametrize("text", ["gen1=exp:1\nsizes=10\nbogus=1", "gen2=exp:1\nsizes=10", "gen1=exp:1\nnovalue"])
def test_parse_config_rejects(text):
    with pytest.raises(InvalidInputError):
        parse_config(text)


@pytest.mark.parametrize("bad", [dict(trials=0), dict(mode="other"), dict(B=50), dict(sizes=(60,)),
                                 dict(generators=("exp:1",), sizes=(5,))])
def test_config_rejects(bad):
    with pytest.raises(InvalidParameterError):
        ExperimentConfig(**{**SMALL, **bad})


def test_resolve_design_fixed_and_derived():
    fixed = resolve_design(ExperimentConfig(**{**SMALL, "B": 10, "R": 20}))
    assert (fixed.B, fixed.R, fixed.theta, fixed.point_budget) == (10, 20, 1.0, 100)
    derived = resolve_design(ExperimentConfig(**{**SMALL, "sizes": (4000, 2000), "N": 1500}))
    assert derived.theta == 0.015 and derived.R == 45 and derived.B == 22 and derived.point_budget == 500
    theo = resolve_design(ExperimentConfig(**{**SMALL, "sizes": (4000, 2000), "N": 1500, "mode": "nosplit",
                                              "theta": "theoretical", "B": 100, "R": 15}))
    assert math.isclose(theo.theta, 1500 ** (1 / 3) / 3000) and theo.point_budget == 0


def test_nosplit_design_over_budget():
    with pytest.raises(InvalidParameterError):
        resolve_design(ExperimentConfig(**{**SMALL, "mode": "nosplit", "B": 50, "R": 20}))


def test_constant_model_single_trial():
    cfg = ExperimentConfig(generators=("exp:1",), sizes=(20,), trials=1, N=30, model="constant",
                           model_params={"value": 3.0}, truth=3.0)
    rep = run_coverage_experiment(cfg)
    assert rep.coverage == 1.0 and rep.mean_length == 0.0 and rep.std_length == 0.0 and rep.bias == 0.0
    assert math.isnan(rep.ratio_sigma)


def test_report_fields_and_counts(tmp_path):
    cfg = ExperimentConfig(**{**SMALL, "sizes": (20, 10), "theta": "1"})
    trace = tmp_path / "trace.csv"
    rep = run_coverage_experiment(cfg, trace=trace)
    assert rep.trials == 12 and len(rep.records) == 12
    assert (rep.coverage * rep.trials).is_integer()
    with open(trace, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert rep.neg_var_count == sum(float(r["sigma2_raw"]) < 0 for r in rows)
    assert rep.neg_var_count == sum(r["truncated"] == "1" for r in rows)
    assert rep.neg_var_count > 0


def test_report_round_trip_and_append(tmp_path):
    rep = run_coverage_experiment(ExperimentConfig(**SMALL))
    path = tmp_path / "report.csv"
    write_report(rep, path)
    assert read_report(path) == [rep]
    write_report(rep, path, append=True)
    lines = path.read_text().splitlines()
    assert len(lines) == 3 and lines[0] == ",".join(REPORT_FIELDS)
    assert read_report(path) == [rep, rep]


def test_append_creates_header(tmp_path):
    rep = CoverageReport(0.949, 0.158, 0.028, 2.0, 0, 0.001, 1000, 0.182, 0.0)
    path = tmp_path / "new.csv"
    write_report(rep, path, append=True)
    text = path.read_text().splitlines()
    assert len(text) == 2
    assert text[1].split(",")[0] == "0.949"


def test_coverage_serialization_from_counts():
    records = [type("R", (), dict(halfwidth=0.1, ratio=1.0, covered=i < 949, sigma2_raw=0.1, center=0.2))()
               for i in range(1000)]
    rep = aggregate(records, 0.2)
    assert repr(rep.coverage) == "0.949"


def test_write_report_error_names_path(tmp_path):
    rep = CoverageReport(0.9, 0.1, 0.01, 1.0, 0, 0.0, 10, 0.1, 0.0)
    bad = tmp_path / "missing" / "out.csv"
    with pytest.raises(OSError, match="missing"):
        write_report(rep, bad)


def test_format_table():
    rep = CoverageReport(0.947, 0.158, 0.028, 2.14, 0, 0.001, 1000, 0.182, 0.0, sizes="600,300")
    table = format_table([rep])
    assert "n_1=600,n_2=300" in table and "94.7%" in table and "0.158" in table


def test_workers_do_not_change_results(tmp_path):
    cfg = ExperimentConfig(**SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_report(run_coverage_experiment(cfg, workers=1), a)
    write_report(run_coverage_experiment(cfg, workers=3), b)
    assert a.read_bytes() == b.read_bytes()


def test_trials_are_independent_of_trial_count():
    short = run_coverage_experiment(ExperimentConfig(**{**SMALL, "trials": 5}))
    long = run_coverage_experiment(ExperimentConfig(**SMALL))
    assert long.records[:5] == short.records


def test_nosplit_warns_for_small_subsamples():
    cfg = ExperimentConfig(generators=("exp:0.5", "exp:1"), sizes=(4000, 2000), trials=1, N=1500, mode="nosplit",
                           theta="theoretical", B=100, R=15, truth=0.182)
    with pytest.warns(SmallSubsampleWarning):
        run_coverage_experiment(cfg)


def test_oracle_variance_coverage():
    # sample mean of Normal(1, 2) data with its exact variance sd^2/n: no estimation error at all
    n, trials, gen = 50, 1000, Normal(1.0, 2.0)
    covered = 0
    for t in range(trials):
        ds = generate_dataset(gen, n, derive_stream(11, ["trial", t, "data", "input", 1]))
        ci = normal_interval(float(ds.observations.mean()), gen.variance() / n, 0.0, 0.05)
        covered += ci.contains(1.0)
    se = math.sqrt(0.95 * 0.05 / trials)
    assert abs(covered / trials - 0.95) < 3 * se


def test_exact_mean_experiment_covers():
    cfg = ExperimentConfig(generators=("normal:1:2",), sizes=(100,), trials=300, N=300, model="mean",
                           model_params={"exact": True}, theta="1", B=150, R=2, truth=1.0, mode="nosplit", seed=5)
    rep = run_coverage_experiment(cfg)
    assert abs(rep.coverage - 0.95) < 3 * math.sqrt(0.95 * 0.05 / 300) + 0.02
    assert rep.neg_var_count == 0
