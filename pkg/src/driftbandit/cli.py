"""Command-line entry points for the experiment harness."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .detector import compute_shifts
from .environments import gap_table, lipschitz_check
from .envio import load_env
from .harness import load_config, run_experiment, write_shift_report


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--output", default=None, help="override config output_dir")
    p.add_argument("--seed", type=int, default=None, help="override config base_seed")


def _load_with_overrides(args) -> "ExperimentConfig":
    cfg = load_config(args.config)
    if args.output is not None:
        cfg.output_dir = args.output
    if args.seed is not None:
        cfg.base_seed = args.seed
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_with_overrides(args)
    summary = run_experiment(cfg, threads=args.threads)
    for agg in summary.aggregates:
        print(f"T={agg['T']}: mean regret {agg['mean_regret']:.4f} "
              f"(sd {agg['stddev_regret']:.4f}, n={agg['replicates']})")
    if summary.fit:
        print(f"exponent fit: slope={summary.fit['slope']:.4f} R2={summary.fit['r_squared']:.4f}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_with_overrides(args)
    if not cfg.sweep:
        print("error: config has no sweep list", file=sys.stderr)
        return 2
    return _cmd_run(args)


def _read_contexts(path: str) -> np.ndarray:
    """CSV of context rows; an optional header line and leading 't' column are tolerated."""
    rows = []
    cols = slice(0, None)
    with open(path) as fh:
        first = fh.readline().strip().split(",")
        try:
            rows.append([float(v) for v in first])
        except ValueError:
            if first and first[0] == "t":
                cols = slice(1, None)
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.strip().split(",")[cols]])
    return np.asarray(rows)


def _cmd_detect(args) -> int:
    env = load_env(args.env_file)
    contexts = _read_contexts(args.contexts_file)
    T = min(env.T, len(contexts))
    gaps = gap_table(env, contexts[:T])
    report = compute_shifts(
        gaps, contexts[:T], T, env.K, env.d,
        mode=args.mode, interval_family=args.family, context_binding=args.binding,
    )
    out = args.output or (Path(args.env_file).with_suffix(".shifts.yaml"))
    write_shift_report(report, out)
    print(f"{report.count} experienced significant shift(s): {report.shift_times}")
    print(f"report written to {out}")
    return 0


def _cmd_validate(args) -> int:
    try:
        env = load_env(args.env_file)
    except Exception as exc:  # surface structural errors with the path
        print(f"{args.env_file}: INVALID ({exc})", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    worst = lipschitz_check(env, 2000, rng)
    ok = worst <= 1.0 + 1e-9
    print(f"{args.env_file}: T={env.T} K={env.K} d={env.d} "
          f"phases={len(env.phases)} noise={env.noise} "
          f"sampled Lipschitz ratio {worst:.6f} -> {'OK' if ok else 'VIOLATION'}")
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="driftbandit",
        description="Non-stationary Lipschitz contextual bandit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("config")
    _add_common(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a horizon sweep config")
    p_sweep.add_argument("config")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_det = sub.add_parser("detect-shifts", help="detect experienced significant shifts")
    p_det.add_argument("env_file")
    p_det.add_argument("contexts_file")
    p_det.add_argument("--mode", choices=["exact", "critical"], default="exact")
    p_det.add_argument("--family", choices=["all", "dyadic"], default="all")
    p_det.add_argument("--binding", choices=["current", "any"], default="current")
    p_det.add_argument("--output", default=None)
    p_det.set_defaults(func=_cmd_detect)

    p_val = sub.add_parser("validate-env", help="check a stored environment file")
    p_val.add_argument("env_file")
    p_val.set_defaults(func=_cmd_validate)

    p_ver = sub.add_parser("version", help="print version")
    p_ver.set_defaults(func=lambda args: (print(__version__), 0)[1])

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
