import hashlib
import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, ValidationError

from protokws.errors import InvalidConfig, IoFailure

M = TypeVar("M", bound=BaseModel)

DEFAULT_SEED = 7


def _import_dotenv() -> Any:
    """Import python-dotenv library."""
    try:
        from dotenv import load_dotenv
        return load_dotenv
    except ImportError as e:
        raise ImportError(
            "Cannot import dotenv, please install with `pip install python-dotenv`."
        ) from e


def load_environment() -> None:
    """Pull PROTOKWS_* defaults from a .env file, if present."""
    load_dotenv = _import_dotenv()
    load_dotenv()


@dataclass
class EnvDefault(ABC):
    """A setting whose default can come from the environment."""

    env_var: str

    @abstractmethod
    def value(self) -> Any:
        """Return the environment value, or the built-in default."""


@dataclass
class IntEnvDefault(EnvDefault):
    default: int = 1
    minimum: int = 1

    def value(self) -> int:
        raw = os.getenv(self.env_var)
        if raw is None or not raw.strip():
            return self.default
        try:
            parsed = int(raw)
        except ValueError as e:
            raise InvalidConfig(f"{self.env_var} must be an integer, got {raw!r}") from e
        if parsed < self.minimum:
            raise InvalidConfig(f"{self.env_var} must be >= {self.minimum}, got {parsed}")
        return parsed


@dataclass
class StrEnvDefault(EnvDefault):
    default: str = ""

    def value(self) -> str:
        return os.getenv(self.env_var) or self.default


THREADS = IntEnvDefault("PROTOKWS_THREADS", default=1)
LOG_LEVEL = StrEnvDefault("PROTOKWS_LOG_LEVEL", default="INFO")


def derive_seed(seed: int, label: str) -> int:
    """
    Derive an independent 63-bit seed for one purpose from the master seed.

    The derivation is sha256("{seed}:{label}"), first 8 bytes big-endian,
    masked to 63 bits, so it is stable across platforms and Python versions.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)


def config_digest(config: BaseModel) -> bytes:
    """sha256 of a config's canonical JSON form."""
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).digest()


def load_config(model: Type[M], path: Union[str, Path, None]) -> M:
    """
    Read a JSON config document into a pydantic model.

    A missing path yields the model's defaults.

    Raises:
        InvalidConfig: If the document is not JSON or fails validation.
    """
    if path is None:
        return model()
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read config {source}", str(e)) from e
    try:
        return model.model_validate_json(text)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid {model.__name__} in {source}", str(e)) from e


def validate_config(model: Type[M], data: Any) -> M:
    """Validate an in-memory mapping, mapping pydantic failures to InvalidConfig."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"Invalid {model.__name__}", str(e)) from e


class ConfigModel(BaseModel):
    """
    Base for JSON-accepted settings.

    Unknown keys are rejected and every validation failure, including one
    raised while constructing the model directly, surfaces as InvalidConfig.
    """

    model_config = ConfigDict(extra="forbid")

    def __init__(self, **data: Any) -> None:
        try:
            super().__init__(**data)
        except ValidationError as e:
            raise InvalidConfig(f"Invalid {type(self).__name__}", str(e)) from e

    def updated(self: M, **changes: Any) -> M:
        """Copy with some fields replaced; unlike model_copy, the result is re-validated."""
        return validate_config(type(self), {**dict(self), **changes})
