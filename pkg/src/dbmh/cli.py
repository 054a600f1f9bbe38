"""Command line front end: dbmh <experiment> --config cfg.json [options].

Exit codes: 0 all configured thresholds pass, 1 a threshold failed,
2 error (bad config, runtime failure), 3 no data (summarize only).
"""

from __future__ import annotations

import argparse
import os
import sys

from .experiments import (
    EXPERIMENT_KINDS,
    ConfigError,
    parse_config,
    run,
    summarize,
)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="dbmh",
        description="Coupled Dyson Brownian motion experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run the {kind} experiment")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="artifact output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="trial-level parallelism (env DBMH_WORKERS as fallback)")
    s = sub.add_parser("summarize", help="aggregate summary.json files")
    s.add_argument("paths", nargs="+", help="summary.json files or run directories")
    s.add_argument("--kind", default=None, help="restrict to one experiment kind")
    return parser


def _resolve_workers(cli_value):
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get("DBMH_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"DBMH_WORKERS is not an integer: {env!r}") from None
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "summarize":
        paths = []
        for p in args.paths:
            if os.path.isdir(p):
                for root, _, files in sorted(os.walk(p)):
                    for f in sorted(files):
                        if f == "summary.json":
                            paths.append(os.path.join(root, f))
            else:
                paths.append(p)
        try:
            text, has_data = summarize(paths, kind=args.kind)
        except Exception as exc:  # malformed summary file etc.
            print(f"error: {exc}", file=sys.stderr)
            return 2
        sys.stdout.write(text)
        return 0 if has_data else 3

    try:
        cfg = parse_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(
                f"config names experiment '{cfg.kind}' but subcommand was '{args.command}'"
            )
        if args.seed is not None:
            fields = cfg.values()
            fields["seed"] = args.seed
            cfg = parse_config(fields)
        workers = _resolve_workers(args.workers)
        record = run(cfg, out_dir=args.out, workers=workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    status = "pass" if record.passed else "FAIL"
    print(f"{cfg.kind}: {status} (hash {record.config_hash[:12]}, "
          f"wall {record.wall_clock:.1f}s)")
    for key, val in record.aggregates.items():
        if isinstance(val, (int, float, bool)):
            print(f"  {key} = {val}")
    if record.artifact_dir:
        print(f"  artifacts: {record.artifact_dir}")
    return 0 if record.passed else 1


if __name__ == "__main__":
    sys.exit(main())
