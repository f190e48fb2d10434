"""Command-line interface: solve | sweep | crosscheck | identities."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .exceptions import EddySelectError
from .runner import run

WORKERS_ENV = "EDDYSELECT_WORKERS"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eddyselect",
        description="Selected eddy vorticity and periodic layer profiles "
                    "for slip-forced steady flows.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
            ("solve", "single Picard solve with diagnostics"),
            ("sweep", "epsilon sweep with log-log slope fits"),
            ("crosscheck", "Picard solve cross-checked against the marching oracle"),
            ("identities", "collar-coordinate identity and stream-function checks")):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="path to a JSON run config")
        cmd.add_argument("--output-dir", default=None,
                         help="override the config's output directory")
        cmd.add_argument("--workers", type=int, default=None,
                         help=f"sweep parallelism (default ${WORKERS_ENV} or 1)")
        cmd.add_argument("--verbose", action="store_true")
    return parser


_MODE_BY_COMMAND = {"solve": "single", "sweep": "sweep",
                    "crosscheck": "crosscheck", "identities": "identities"}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))

    try:
        config = load_config(args.config)
    except (OSError, EddySelectError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    mode = _MODE_BY_COMMAND[args.command]
    if config.mode != mode:
        config = type(config)(**{**config.__dict__, "mode": mode})
    out_dir = args.output_dir or config.output_dir

    try:
        summary = run(config, output_dir=out_dir, workers=workers)
    except EddySelectError as exc:
        os.makedirs(out_dir, exist_ok=True)
        record = {"error": type(exc).__name__, "message": str(exc)}
        with open(os.path.join(out_dir, "error.json"), "w") as fh:
            json.dump(record, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if args.verbose:
        json.dump(summary, sys.stdout, sort_keys=True, indent=2, default=str)
        print()
    else:
        omega = summary.get("omega0")
        status = "PASS" if summary.get("passed") else "FAIL"
        line = f"{status} mode={config.mode}"
        if omega is not None:
            line += f" omega0={omega:.12f}"
        print(line)
    return 0 if summary.get("passed") else 1


if __name__ == "__main__":
    sys.exit(main())
