"""Command-line entry points.

Subcommands:
  run          Monte-Carlo experiment from a config file.
  equivalence  Round-robin-ensemble vs perturbed-history equality check.
  rates        Empirical event-rate study.
  sweep        Re-run the experiment across values of one parameter.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config
from .harness import (
    emit_outputs,
    estimate_event_rates,
    run_equivalence_suite,
    run_monte_carlo,
)

SWEEP_PARAMS = ("T", "d", "m", "K")


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.run.base_seed = args.seed
    if getattr(args, "reps", None) is not None:
        cfg.run.replications = args.reps
    if getattr(args, "out", None) is not None:
        cfg.run.out_dir = args.out
    return cfg.validate()


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    records, summary = run_monte_carlo(cfg)
    trace_path, summary_path = emit_outputs(records, summary, cfg.run.out_dir)
    final = summary["checkpoints"][-1]
    print(f"replications: {summary['replications']}")
    print(f"mean final regret: {final['mean']:.6g} (median {final['median']:.6g})")
    print(f"wrote {trace_path} and {summary_path}")
    return 0


def _cmd_equivalence(args) -> int:
    cfg = load_config(args.config)
    report = run_equivalence_suite(cfg, n_seeds=args.seeds)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {report.matches}/{report.seeds} seeds with identical arm sequences")
    for seed, step, seq_a, seq_b in report.failures:
        print(f"  seed {seed}: first divergence at step {step}")
        print(f"    ensemble:          {seq_a}")
        print(f"    perturbed-history: {seq_b}")
    return 0 if report.passed else 1


def _cmd_rates(args) -> int:
    cfg = load_config(args.config)
    report = estimate_event_rates(cfg, reps=args.reps)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = [int(v) for v in args.values.split(",")]
    out_root = Path(args.out if args.out else cfg.run.out_dir)
    combined = []
    for value in values:
        sub = load_config(args.config)
        if args.param == "T":
            sub.run.horizon = value
        elif args.param == "d":
            sub.env.dim = value
        elif args.param == "m":
            sub.policy.m = value
        elif args.param == "K":
            sub.env.arm_count = value
        sub.validate()
        records, summary = run_monte_carlo(sub)
        out_dir = out_root / f"sweep_{args.param}_{value}"
        emit_outputs(records, summary, out_dir)
        final = summary["checkpoints"][-1]
        combined.append({"value": value, "mean_final_regret": final["mean"]})
        print(f"{args.param}={value}: mean final regret {final['mean']:.6g}")
    (out_root / f"sweep_{args.param}.json").write_text(
        json.dumps(combined, sort_keys=True, indent=2) + "\n"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linens", description="Linear bandit simulation experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a Monte-Carlo experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--reps", type=int)
    p_run.add_argument("--out")
    p_run.set_defaults(func=_cmd_run)

    p_eq = sub.add_parser("equivalence", help="run the policy-equality suite")
    p_eq.add_argument("--config", required=True)
    p_eq.add_argument("--seeds", type=int, default=50)
    p_eq.set_defaults(func=_cmd_equivalence)

    p_rates = sub.add_parser("rates", help="estimate event rates")
    p_rates.add_argument("--config", required=True)
    p_rates.add_argument("--reps", type=int)
    p_rates.set_defaults(func=_cmd_rates)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.add_argument("--out")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
