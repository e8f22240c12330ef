"""
Bit-exact encoder checkpoints.

Layout (little-endian): magic "PKWC", version u32, stage tag u8,
D_in/H/D_emb u32, the parameter blocks W1, b1, W2, b2, Wce, bce, Wctc, bctc
as float32, then a trailer of seed u64, generation u32 and the 32-byte
sha256 digest of the training config.
"""

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from loguru import logger

from protokws.datamodel.models import Stage
from protokws.encoder.network import EncoderParams, param_shapes
from protokws.errors import (
    BadMagic,
    InvalidConfig,
    IoFailure,
    MalformedRecord,
    NonFiniteValue,
    ShapeMismatch,
    TruncatedPayload,
    VersionMismatch,
)

CHECKPOINT_MAGIC = b"PKWC"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sIBIII")
_TRAILER = struct.Struct("<QI32s")
_NO_DIGEST = bytes(32)

PathLike = Union[str, Path]


@dataclass
class EncoderCheckpoint:
    """Encoder parameters plus the provenance of the stage that produced them."""

    params: EncoderParams
    stage: Stage = Stage.PRETRAIN
    seed: int = 0
    generation: int = 0
    config_digest: bytes = field(default=_NO_DIGEST)

    def __post_init__(self) -> None:
        self.params = self.params.astype(np.float32).copy()
        self.params.validate()
        if not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"Checkpoint seed must fit in u64, got {self.seed}")
        if not 0 <= self.generation < 2**32:
            raise InvalidConfig(f"Checkpoint generation must fit in u32, got {self.generation}")
        if len(self.config_digest) != 32:
            raise InvalidConfig("Checkpoint config digest must be 32 bytes")

    @property
    def dims(self) -> tuple:
        return self.params.dims

    def metadata(self) -> Dict[str, Any]:
        d_in, hidden, d_emb = self.dims
        return {
            "stage": self.stage.value,
            "d_in": d_in,
            "hidden": hidden,
            "d_emb": d_emb,
            "seed": self.seed,
            "generation": self.generation,
            "config_digest": self.config_digest.hex(),
            "digest": checkpoint_digest(self),
        }


def checkpoint_bytes(ckpt: EncoderCheckpoint) -> bytes:
    d_in, hidden, d_emb = ckpt.dims
    header = _HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION, ckpt.stage.code, d_in, hidden, d_emb
    )
    chunks = [header]
    for _, value in ckpt.params.items():
        chunks.append(np.ascontiguousarray(value, dtype="<f4").tobytes(order="C"))
    chunks.append(_TRAILER.pack(ckpt.seed, ckpt.generation, ckpt.config_digest))
    return b"".join(chunks)


def checkpoint_from_bytes(blob: bytes, source: str = "<bytes>") -> EncoderCheckpoint:
    if len(blob) < _HEADER.size:
        raise TruncatedPayload(f"Checkpoint {source} is shorter than its header")
    magic, version, stage_code, d_in, hidden, d_emb = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"Checkpoint {source} has bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(
            f"Checkpoint {source} has version {version}, expected {CHECKPOINT_VERSION}"
        )
    if stage_code >= len(Stage):
        raise MalformedRecord(f"Checkpoint {source} has unknown stage tag {stage_code}")
    if min(d_in, hidden, d_emb) < 1:
        raise ShapeMismatch(f"Checkpoint {source} declares empty dims ({d_in}, {hidden}, {d_emb})")

    shapes = param_shapes(d_in, hidden, d_emb)
    n_values = sum(int(np.prod(shape)) for shape in shapes.values())
    expected = _HEADER.size + 4 * n_values + _TRAILER.size
    if len(blob) != expected:
        raise TruncatedPayload(
            f"Checkpoint {source} size does not match its header",
            f"expected {expected} bytes, found {len(blob)}",
        )

    offset = _HEADER.size
    blocks: Dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        count = int(np.prod(shape))
        values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        blocks[name] = values.reshape(shape).astype(np.float32)
        offset += 4 * count
    seed, generation, digest = _TRAILER.unpack_from(blob, offset)

    params = EncoderParams(**blocks)
    for name, value in params.items():
        if not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"Checkpoint {source} parameter {name} contains NaN or Inf")
    return EncoderCheckpoint(
        params=params,
        stage=Stage.from_code(stage_code),
        seed=seed,
        generation=generation,
        config_digest=digest,
    )


def save_checkpoint(ckpt: EncoderCheckpoint, path: PathLike) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(checkpoint_bytes(ckpt))
    except OSError as e:
        raise IoFailure(f"Cannot write checkpoint {target}", str(e)) from e
    logger.info(f"Saved {ckpt.stage.value} checkpoint to {target}")


def load_checkpoint(path: PathLike) -> EncoderCheckpoint:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        BadMagic, VersionMismatch: For foreign or future files.
        TruncatedPayload: If the size disagrees with the declared dims.
        ShapeMismatch: If the declared dims are empty.
    """
    source = Path(path)
    try:
        blob = source.read_bytes()
    except OSError as e:
        raise IoFailure(f"Cannot read checkpoint {source}", str(e)) from e
    return checkpoint_from_bytes(blob, str(source))


def checkpoint_digest(ckpt: EncoderCheckpoint) -> str:
    return hashlib.sha256(checkpoint_bytes(ckpt)).hexdigest()[:16]
