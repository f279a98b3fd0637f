"""`python -m polar <command>` entry point."""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from polar.commands import register_all
from polar.errors import PolarError
from polar.log import setup_logging


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polar", description="Predicate-oriented latent graph role labeler for dialogues.")
    parser.add_argument("--log-level", default="INFO", type=str.upper, choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    register_all(sub)
    return parser


def _diagnostic(code: str, message: str) -> str:
    text = " ".join(str(message).split()).replace('"', "'")
    return f'error code={code} message="{text}"'


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return int(args.func(args) or 0)
    except PolarError as exc:
        print(_diagnostic(exc.code, str(exc)), file=sys.stderr)
    except OSError as exc:
        where = f" {exc.filename}" if exc.filename else ""
        print(_diagnostic("io", f"{exc.strerror or exc}{where}"), file=sys.stderr)
    except Exception as exc:
        print(_diagnostic("internal", f"{type(exc).__name__}: {exc}"), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
