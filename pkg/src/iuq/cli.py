"""Command-line entry point ``iuq``."""

from __future__ import annotations

import argparse
import math
import csv
import sys
from dataclasses import replace
from fractions import Fraction

from .allocation import plan_budget
from .ci import ci_nonsplitting, ci_splitting
from .empirical import InputCollection
from .errors import BudgetTooSmallError, InvalidInputError, InvalidParameterError
from .estimator import EstimatorConfig, subsampled_variance_bootstrap, subsampled_variance_single
from .experiment import format_table, load_config, run_coverage_experiment, write_report
from .model import make_model


def _sizes(text: str) -> list[int]:
    return [int(x) for x in text.split(",")]


def _fraction(text: str) -> float:
    return float(Fraction(text))


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", action="append", required=True, metavar="PATH",
                   help="dataset file, one per input model, in model order")
    p.add_argument("--model", default="mm1", help="mm1, mean, sum or constant")
    p.add_argument("--customers", type=int, default=20)
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--exact", action="store_true", help="noise-free mean functional")
    p.add_argument("--seed", type=int, default=0)


def _build_model(args, m: int):
    if args.model == "mm1":
        return make_model("mm1", num_customers=args.customers, threshold=args.threshold)
    if args.model == "mean":
        return make_model("mean", exact=args.exact)
    if args.model == "sum":
        return make_model("sum", weights=(1.0,) * m, exact=args.exact)
    if args.model == "constant":
        return make_model("constant", inputs=m)
    return make_model(args.model)


def cmd_estimate(args) -> int:
    data = InputCollection.from_files(args.data)
    model = _build_model(args, data.m)
    cfg = EstimatorConfig(args.B, args.R, args.theta)
    if args.target_model is None:
        est = subsampled_variance_bootstrap(data, model, cfg, args.seed)
    else:
        est = subsampled_variance_single(data, model, args.target_model, cfg, args.seed)
    print(f"sigma2   {est.sigma2!r}")
    print(f"V        {est.within_group_v!r}")
    print(f"negative {est.negative}")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma2", "v", "B", "R", "theta", "budget_used"])
            w.writerow([repr(est.sigma2), repr(est.within_group_v), cfg.B, cfg.R, repr(cfg.theta), est.budget_used])
    return 0


def cmd_allocate(args) -> int:
    plan = plan_budget(args.N, _sizes(args.sizes), args.rule, args.target_subsample, args.inner_multiplier)
    print(f"B      {plan.B}")
    print(f"R      {plan.R}")
    print(f"theta  {plan.theta!r}")
    print(f"s      {','.join(map(str, plan.s))}")
    print(f"unused {plan.leftover}")
    for w in plan.warnings:
        print(f"warning: {w}")
    return 0


def cmd_ci(args) -> int:
    data = InputCollection.from_files(args.data)
    model = _build_model(args, data.m)
    n_var = args.N if args.mode == "nosplit" else math.floor(args.split_fraction * args.N + 0.5)
    if args.B is not None:
        if args.R is None:
            raise InvalidParameterError("--B needs --R")
        n_var = args.B * args.R
    plan = plan_budget(n_var, data.sizes, args.theta_rule, args.target_subsample, args.inner_multiplier)
    B, R = (args.B, args.R) if args.B is not None else (plan.B, plan.R)
    cfg = EstimatorConfig(B, R, plan.theta)
    if args.mode == "split":
        ci = ci_splitting(data, model, cfg, args.N - n_var, args.alpha, args.seed)
    else:
        ci = ci_nonsplitting(data, model, cfg, args.alpha, args.seed)
    print(f"center     {ci.center!r}")
    print(f"halfwidth  {ci.halfwidth!r}")
    print(f"interval   [{ci.lo!r}, {ci.hi!r}]")
    print(f"sigma_I^2  {ci.sigma_i2_used!r}")
    print(f"sigma_S^2  {ci.sigma_s2_used!r}")
    print(f"truncated  {ci.was_truncated}")
    print(f"design     B={B} R={R} theta={plan.theta!r} point_runs={args.N - n_var if args.mode == 'split' else 0}")
    return 0


def cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report = run_coverage_experiment(cfg, workers=args.workers, trace=args.trace)
    print(format_table([report]))
    if args.out:
        write_report(report, args.out, append=args.append)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iuq", description="Input uncertainty quantification for stochastic simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="estimate the input variance")
    _add_model_args(p)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--theta", type=_fraction, default=1.0)
    p.add_argument("--target-model", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("allocate", help="choose B, R and theta for a budget")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--sizes", required=True, help="comma-separated data sizes")
    p.add_argument("--rule", choices=["practical", "theoretical"], default="practical")
    p.add_argument("--target-subsample", type=int, default=30)
    p.add_argument("--inner-multiplier", type=float, default=1.0)
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("ci", help="confidence interval for the performance measure")
    _add_model_args(p)
    p.add_argument("--mode", choices=["split", "nosplit"], default="split")
    p.add_argument("--N", type=int, default=1500)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--theta-rule", choices=["practical", "theoretical"], default="practical")
    p.add_argument("--target-subsample", type=int, default=30)
    p.add_argument("--inner-multiplier", type=float, default=1.0)
    p.add_argument("--split-fraction", type=_fraction, default=2.0 / 3.0)
    p.add_argument("--B", type=int)
    p.add_argument("--R", type=int)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("experiment", help="run a coverage experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--trace")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--append", action="store_true", help="append to an existing report")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidParameterError, InvalidInputError, BudgetTooSmallError, OSError) as exc:
        print(f"iuq: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
