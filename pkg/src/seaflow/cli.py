"""Command-line entry point: ``seaflow <command> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import SeaflowError
from .pipeline import COMMANDS, PipelineConfig, run_command

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seaflow", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS) + ["run-all"])
    parser.add_argument("--config", help="JSON pipeline configuration")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--out", default=".", help="output directory (default: current directory)")
    parser.add_argument("--log-level", choices=sorted(LOG_LEVELS), default="warn")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=LOG_LEVELS[args.log_level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        if args.config is not None:
            cfg = PipelineConfig.load(args.config)
        elif args.command == "synth":
            cfg = PipelineConfig.from_dict({})
        else:
            raise SeaflowError("--config is required for this command")
        if args.seed is not None:
            cfg.seed = args.seed
        files = run_command(args.command, cfg, args.out)
    except SeaflowError as e:
        err = e.to_dict()
        err["command"] = args.command
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 1
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
