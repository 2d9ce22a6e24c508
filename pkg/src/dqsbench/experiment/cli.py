"""Command line entry point: ``run``, ``export`` and ``compare``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .runner import (
    RunError,
    compare,
    format_table,
    rows_from_csv,
    rows_from_json,
    rows_to_csv,
    rows_to_json,
    run_experiment,
    write_atomic,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, args.output)
    for s in result.summaries:
        th = "" if s["threshold"] is None else f" C={s['threshold']:g}"
        print(
            f"{s['protocol']}{th} k={s['k']} runs={s['runs']}: "
            f"eps={s['median_abs_error']:.4g} depth={s['final_depth']:g} c_tot={s['c_tot']}"
        )
    print(f"wrote {result.output_dir}")
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    src_fmt = "csv" if args.format == "json" else "json"
    src = run_dir / f"records.{src_fmt}"
    if not src.exists():
        raise RunError(f"{src} not found")
    text = src.read_text()
    rows = rows_from_csv(text) if src_fmt == "csv" else rows_from_json(text)
    out = Path(args.out) if args.out else run_dir / f"records.{args.format}"
    write_atomic(out, rows_to_json(rows) if args.format == "json" else rows_to_csv(rows))
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    summaries = []
    for d in args.run_dirs:
        path = Path(d) / "summary.json"
        if not path.exists():
            raise RunError(f"{path} not found")
        summaries += json.loads(path.read_text())["summaries"]
    if args.k is not None:
        summaries = [s for s in summaries if s["k"] == args.k]
    try:
        table = compare(summaries)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    print(format_table(table))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dqsbench", description="Noisy quantum dynamics benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="INI experiment file")
    run.add_argument("--output", help="output directory (relative paths use $DQSBENCH_OUTPUT_ROOT)")
    run.set_defaults(func=_cmd_run)
    exp = sub.add_parser("export", help="rewrite a run's records in another format")
    exp.add_argument("run_dir")
    exp.add_argument("--format", choices=("csv", "json"), default="json")
    exp.add_argument("--out", help="destination file")
    exp.set_defaults(func=_cmd_export)
    cmp_ = sub.add_parser("compare", help="tabulate summaries of finished runs")
    cmp_.add_argument("run_dirs", nargs="+")
    cmp_.add_argument("--k", type=int, help="restrict to one shot count")
    cmp_.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RunError, OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
