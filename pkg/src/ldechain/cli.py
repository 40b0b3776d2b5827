"""``ldechain <subcommand> --config <path> [--out <path>] [--seed N] [--threads N] [--format csv|json]``

Exit codes: 0 success, 1 config error, 2 numerical-validation failure,
3 resource limit.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .ed import SizeLimitError
from .experiments import COMMANDS, ConfigError, ValidationFailure, load_config

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_RESOURCE = 0, 1, 2, 3

log = logging.getLogger("ldechain")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldechain",
        description="Entanglement and teleportation experiments on engineered XX chains.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="JSON config file (defaults if omitted)")
        p.add_argument("--out", type=Path, help="output file (stdout if omitted)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _write(table, args) -> None:
    text = table.to_json() if args.format == "json" else table.to_csv()
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        raw = args.config.read_text(encoding="utf-8") if args.config else None
        config = load_config(args.command, raw)
        if args.seed is not None:
            config = replace(config, seed=args.seed)
    except SizeLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ValueError) as exc:
        src = args.config or "<defaults>"
        print(f"config error in {src}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        table = COMMANDS[args.command](config, threads=max(1, args.threads))
    except SizeLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValidationFailure as exc:
        if exc.table is not None:
            _write(exc.table, args)
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except MemoryError:
        print("resource limit: out of memory", file=sys.stderr)
        return EXIT_RESOURCE
    _write(table, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
