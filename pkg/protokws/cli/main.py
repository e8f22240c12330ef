import argparse
import json
import sys
from typing import IO, Any, Dict, List, NoReturn, Optional

from loguru import logger

from protokws.cli.commands import KwsCommands
from protokws.config import LOG_LEVEL, load_environment
from protokws.errors import InvalidConfig, KwsError, UsageError


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="protokws",
        description="Few-shot keyword spotting with prototype-based classification.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    KwsCommands.register_commands(subparsers)
    return parser


def configure_logging(level: Optional[str]) -> None:
    """Send all log output to stderr at the requested level."""
    logger.remove()
    try:
        logger.add(sys.stderr, level=(level or LOG_LEVEL.value()).upper())
    except ValueError as e:
        raise InvalidConfig(f"Unknown log level {level!r}") from e


def run_cli(argv: Optional[List[str]] = None, stdout: Optional[IO[str]] = None) -> int:
    """
    Run one subcommand.

    Prints exactly one JSON summary line on stdout, success or failure.

    Returns:
        0 on success, 1 for usage errors, 2 for data errors, 3 for numeric failures.
    """
    stream = stdout or sys.stdout
    summary: Dict[str, Any]
    try:
        load_environment()
        args = vars(build_parser().parse_args(argv))
        configure_logging(args.get("log_level"))
        handler = args.pop("handler")
        summary = handler(args)
        code = 0
    except KwsError as e:
        logger.error(f"{type(e).__name__}: {e.developer_message}")
        summary = e.to_summary()
        code = e.exit_code
    stream.write(json.dumps(summary) + "\n")
    stream.flush()
    return code


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))
