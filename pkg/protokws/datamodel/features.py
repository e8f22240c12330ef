"""Binary feature files and in-memory feature datasets."""

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from loguru import logger

from protokws.datamodel.manifest import Manifest, Utterance
from protokws.errors import (
    BadMagic,
    DimensionMismatch,
    IoFailure,
    NonFiniteValue,
    TruncatedPayload,
    VersionMismatch,
    ZeroFrames,
)

FEATURE_MAGIC = b"PKWS"
FEATURE_VERSION = 1
_HEADER = struct.Struct("<4sIII")

PathLike = Union[str, Path]


def _as_feature_matrix(matrix: np.ndarray) -> np.ndarray:
    frames = np.asarray(matrix)
    if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
        raise DimensionMismatch(
            "A feature sequence must be a T x D matrix with T >= 1 and D >= 1",
            f"got shape {frames.shape}",
        )
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue("Feature matrix contains NaN or Inf values")
    return frames


def write_features(matrix: np.ndarray, path: PathLike) -> None:
    """
    Write a T x D feature matrix as a little-endian float32 feature file.

    Args:
        matrix: The feature sequence. Values are stored as float32.
        path: Destination file; parent directories are created.

    Raises:
        NonFiniteValue: If any value is NaN or Inf after the float32 cast.
        IoFailure: If the file cannot be written.
    """
    frames = _as_feature_matrix(matrix)
    n_frames, dim = frames.shape
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "wb") as handle:
            handle.write(_HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, n_frames, dim))
            handle.write(frames.tobytes(order="C"))
    except OSError as e:
        raise IoFailure(f"Cannot write feature file {target}", str(e)) from e


def read_features(path: PathLike) -> np.ndarray:
    """
    Read a feature file written by write_features.

    Returns:
        A (T, D) float32 array, bitwise equal to what was written.
    """
    source = Path(path)
    try:
        blob = source.read_bytes()
    except OSError as e:
        raise IoFailure(f"Cannot read feature file {source}", str(e)) from e

    if len(blob) < _HEADER.size:
        raise TruncatedPayload(f"Feature file {source} is shorter than its header")
    magic, version, n_frames, dim = _HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise BadMagic(f"Feature file {source} has bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise VersionMismatch(
            f"Feature file {source} has version {version}, expected {FEATURE_VERSION}"
        )
    if n_frames == 0:
        raise ZeroFrames(f"Feature file {source} declares zero frames")
    if dim == 0:
        raise DimensionMismatch(f"Feature file {source} declares zero feature dimensions")

    expected = _HEADER.size + n_frames * dim * 4
    if len(blob) != expected:
        raise TruncatedPayload(
            f"Feature file {source} payload does not match its header",
            f"expected {expected} bytes, found {len(blob)}",
        )
    frames = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n_frames, dim)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteValue(f"Feature file {source} contains NaN or Inf values")
    return frames.astype(np.float32)


def peek_feature_dim(path: PathLike) -> int:
    """Return D from a feature file header without reading the payload."""
    source = Path(path)
    try:
        with open(source, "rb") as handle:
            header = handle.read(_HEADER.size)
    except OSError as e:
        raise IoFailure(f"Cannot read feature file {source}", str(e)) from e
    if len(header) < _HEADER.size:
        raise TruncatedPayload(f"Feature file {source} is shorter than its header")
    magic, _, _, dim = _HEADER.unpack(header)
    if magic != FEATURE_MAGIC:
        raise BadMagic(f"Feature file {source} has bad magic {magic!r}")
    return dim


@dataclass
class FeatureDataset:
    """Manifest records paired with their loaded feature matrices."""

    records: List[Utterance]
    features: List[np.ndarray]

    def __post_init__(self) -> None:
        if len(self.records) != len(self.features):
            raise DimensionMismatch("Every record needs exactly one feature matrix")
        dims = {f.shape[1] for f in self.features}
        if len(dims) > 1:
            raise DimensionMismatch(
                "Feature dimension varies within one dataset", f"dimensions seen: {sorted(dims)}"
            )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def labels(self) -> List[int]:
        return [r.label for r in self.records]

    @property
    def utt_ids(self) -> List[str]:
        return [r.utt_id for r in self.records]

    @property
    def feature_dim(self) -> int:
        return self.features[0].shape[1] if self.features else 0

    @property
    def speakers(self) -> List[str]:
        return sorted({r.speaker_id for r in self.records})

    def subset(self, indices: Sequence[int]) -> "FeatureDataset":
        return FeatureDataset(
            records=[self.records[i] for i in indices],
            features=[self.features[i] for i in indices],
        )


def load_dataset(manifest: Manifest) -> FeatureDataset:
    """Read every feature file a manifest references, in manifest order."""
    features = [read_features(manifest.resolve(record)) for record in manifest.records]
    dataset = FeatureDataset(records=list(manifest.records), features=features)
    logger.debug(f"Loaded {len(dataset)} feature files from {manifest.root}")
    return dataset
