from protokws.cli.base import CommandProvider, CommandProviderMeta
from protokws.cli.commands import KwsCommands
from protokws.cli.main import build_parser, main, run_cli

__all__ = [
    "CommandProvider",
    "CommandProviderMeta",
    "KwsCommands",
    "build_parser",
    "main",
    "run_cli",
]
