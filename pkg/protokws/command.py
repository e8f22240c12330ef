import argparse
import functools
import inspect
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

from protokws.config import DEFAULT_SEED

CommandFunc = Callable[[Dict[str, Any]], Dict[str, Any]]

_TYPES: Dict[str, Callable[[str], Any]] = {
    "string": str,
    "integer": int,
    "number": float,
}


@dataclass(frozen=True)
class Param:
    """One command-line flag of a command."""

    name: str
    type: str = "string"
    description: str = ""
    required: bool = False
    default: Any = None
    choices: Optional[Sequence[str]] = None

    @property
    def flag(self) -> str:
        return "--" + self.name.replace("_", "-")

    def add_to(self, parser: argparse.ArgumentParser) -> None:
        if self.type == "boolean":
            parser.add_argument(
                self.flag, dest=self.name, action="store_true", help=self.description
            )
            return
        parser.add_argument(
            self.flag,
            dest=self.name,
            type=_TYPES[self.type],
            required=self.required,
            default=self.default,
            choices=self.choices,
            help=self.description,
        )


# Flags every command accepts.
SHARED_PARAMS: List[Param] = [
    Param(
        name="seed",
        type="integer",
        description=(
            "Master seed. Per-purpose seeds are derived as sha256('<seed>:<label>') "
            "truncated to 63 bits, with labels corpus, init, split, train:SIC, "
            "train:SID and train:SDD:<speaker>."
        ),
        default=DEFAULT_SEED,
    ),
    Param(name="out", description="Directory that receives every output file"),
    Param(name="threads", type="integer", description="Worker threads (PROTOKWS_THREADS)"),
    Param(name="log_level", description="Log level for stderr (PROTOKWS_LOG_LEVEL)"),
]


def command(
    func: Optional[Callable] = None,
    desc: Optional[str] = None,
    name: Optional[str] = None,
    params: Optional[List[Param]] = None,
) -> Callable:
    """
    A decorator that turns a function into a protokws subcommand.

    The function receives the parsed flags as a dict and returns the fields
    of the JSON summary line.

    Args:
        func: The function to decorate.
        desc: Command help. If not provided, uses the function's docstring.
        name: Command name. If not provided, uses the function name with dashes.
        params: Command-specific flags; the shared flags are always added.

    Returns:
        The decorated function.
    """

    def decorator(func: Callable) -> Callable:
        command_name = name or func.__name__.replace("_", "-")
        description = desc or inspect.cleandoc(func.__doc__ or "")
        command_params = list(params or []) + SHARED_PARAMS

        @functools.wraps(func)
        def run(args: Dict[str, Any]) -> Dict[str, Any]:
            summary: Dict[str, Any] = {"status": "ok", "command": command_name}
            summary.update(func(args))
            return summary

        def register_with_parser(subparsers: Any) -> None:
            """Add this command and its flags to an argparse subparsers action."""
            parser = subparsers.add_parser(
                command_name, help=description, description=description
            )
            for param in command_params:
                param.add_to(parser)
            parser.set_defaults(handler=run)

        run._is_command = True  # type: ignore[attr-defined]
        run.command_name = command_name  # type: ignore[attr-defined]
        run.params = command_params  # type: ignore[attr-defined]
        run.register_with_parser = register_with_parser  # type: ignore[attr-defined]
        return run

    if func:
        return decorator(func)
    return decorator
