from abc import ABCMeta
from typing import Any, Callable, List


class CommandProviderMeta(ABCMeta):
    """Metaclass to auto-discover commands in provider classes."""

    def __new__(cls, name, bases, dct):  # type: ignore[no-untyped-def]
        new_class = super().__new__(cls, name, bases, dct)
        new_class._commands = []
        for attr in dct.values():
            if hasattr(attr, "_is_command"):
                new_class._commands.append(attr)
        return new_class


class CommandProvider(metaclass=CommandProviderMeta):
    """Base class for command providers to enable bulk registration."""

    _commands: List[Callable]

    @classmethod
    def get_commands(cls) -> List[Callable]:
        """Return all commands marked with the @command decorator."""
        return cls._commands

    @classmethod
    def register_commands(cls, subparsers: Any) -> None:
        """Register all commands in this provider with an argparse subparsers action."""
        for command in cls.get_commands():
            command.register_with_parser(subparsers)
