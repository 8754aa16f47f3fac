"""Command-line entry point.

Exit status: 0 on success, 2 on configuration or input errors, 3 on
numerical failure during a run.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, SwarmlimError
from .harness.config import load_experiment, load_sweep
from .harness.io import fmt, read_snapshot
from .harness.run import run, sweep
from .transport import EmpiricalMeasure, w1_multispecies

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlim",
        description="Multi-species swarming simulations across the inertial, "
        "kinetic and macroscopic model levels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one experiment config")
    p_sim.add_argument("config", help="experiment config (.toml or .json)")
    p_sim.add_argument("--out", default=None, help="output directory override")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep config")
    p_sweep.add_argument("config", help="sweep config (.toml or .json)")
    p_sweep.add_argument("--out", default=None, help="output directory override")

    p_met = sub.add_parser("metrics", help="transport distance between snapshots")
    p_met.add_argument("snapshot_a", help="snapshot CSV")
    p_met.add_argument("snapshot_b", help="snapshot CSV")
    p_met.add_argument(
        "--method", choices=("exact", "1d", "sliced"), default="exact"
    )
    p_met.add_argument("--L", type=int, default=64, help="sliced directions")
    p_met.add_argument("--seed", type=int, default=0, help="sliced direction seed")

    p_val = sub.add_parser("validate-config", help="check a config file")
    p_val.add_argument("config", help="config path (.toml or .json)")
    return parser


def _cmd_simulate(args) -> int:
    config = load_experiment(args.config)
    manifest = run(config, out_dir=args.out)
    if manifest.error is not None:
        print(f"numerical failure: {manifest.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = args.out or config.output_dir
    print(f"run complete: {len(manifest.files)} files in {out}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    sw = load_sweep(args.config)
    out = args.out or sw.base.output_dir
    if out is None:
        raise ConfigError("output_dir", "no output directory given")
    result = sweep(sw, out_dir=out)
    if result.errors:
        for value, message in result.errors.items():
            print(f"point {value:g} failed: {message}", file=sys.stderr)
        return EXIT_NUMERICAL
    if result.degenerate:
        print(f"sweep complete in {out}; rate fit degenerate (flagged)")
    else:
        print(f"sweep complete in {out}; fitted slope {fmt(result.slope)}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    side_a = read_snapshot(args.snapshot_a)
    side_b = read_snapshot(args.snapshot_b)
    if side_a.n_species != side_b.n_species:
        raise ConfigError("snapshot_b", "species counts differ between snapshots")
    mus = [EmpiricalMeasure(e.positions, e.weights) for e in side_a.species]
    nus = [EmpiricalMeasure(e.positions, e.weights) for e in side_b.species]
    kwargs = {}
    if args.method == "sliced":
        kwargs = {"n_directions": args.L, "seed": args.seed}
    total = 0.0
    for i, (mu, nu) in enumerate(zip(mus, nus)):
        value = w1_multispecies([mu], [nu], method=args.method, **kwargs)
        total += value
        print(f"species_{i} {fmt(value)}")
    print(f"total {fmt(total)}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    from .harness.config import load_raw, parse_experiment, parse_sweep

    raw = load_raw(args.config)
    if isinstance(raw, dict) and "sweep" in raw:
        parse_sweep(raw)
        print("ok: sweep config")
    else:
        parse_experiment(raw)
        print("ok: experiment config")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "metrics": _cmd_metrics,
        "validate-config": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error at {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SwarmlimError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
