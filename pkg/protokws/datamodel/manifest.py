import hashlib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from protokws.datamodel.models import CLASS_IDS, Role, Split, validate_label
from protokws.errors import (
    ClassTooSmall,
    DimensionMismatch,
    DuplicateUttId,
    InvalidConfig,
    IoFailure,
    MalformedRecord,
)

PathLike = Union[str, Path]


class Utterance(BaseModel):
    """One manifest record: an utterance, its speaker, label and feature file."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    utt_id: str = Field(min_length=1)
    speaker_id: str = Field(alias="speaker")
    label: int
    feature_path: str = Field(alias="features")
    role: Optional[Role] = None

    @field_validator("label", mode="before")
    @classmethod
    def _check_label(cls, value: object) -> int:
        # InvalidLabel is not a ValueError, so it escapes pydantic untouched.
        return validate_label(value)

    def to_record(self, with_role: bool = False) -> Dict[str, object]:
        record: Dict[str, object] = {
            "utt_id": self.utt_id,
            "speaker": self.speaker_id,
            "label": self.label,
            "features": self.feature_path,
        }
        if with_role and self.role is not None:
            record["role"] = self.role.value
        return record


@dataclass
class Manifest:
    """An ordered list of utterances plus the dataset role and split they belong to."""

    records: List[Utterance]
    role: Optional[Role] = None
    split: Optional[Split] = None
    root: Path = field(default_factory=Path)

    def __post_init__(self) -> None:
        seen = set()
        for record in self.records:
            if record.utt_id in seen:
                raise DuplicateUttId(f"Duplicate utt_id {record.utt_id!r}")
            seen.add(record.utt_id)
        self.root = Path(self.root)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.records)

    @property
    def utt_ids(self) -> List[str]:
        return [r.utt_id for r in self.records]

    @property
    def speakers(self) -> List[str]:
        return sorted({r.speaker_id for r in self.records})

    @property
    def mixed_roles(self) -> bool:
        return len({r.role for r in self.records}) > 1

    def resolve(self, record: Utterance) -> Path:
        """Absolute-ish path of a record's feature file."""
        return self.root / record.feature_path

    def class_histogram(self) -> Dict[int, int]:
        counts = Counter(r.label for r in self.records)
        return {c: counts.get(c, 0) for c in CLASS_IDS}


def _common_role(records: Sequence[Utterance]) -> Optional[Role]:
    roles = {r.role for r in records}
    return roles.pop() if len(roles) == 1 else None


def load_manifest(
    path: PathLike, role: Optional[Role] = None, split: Optional[Split] = None
) -> Manifest:
    """
    Load a JSON-Lines manifest.

    Args:
        path: Manifest file; feature paths resolve relative to its directory.
        role: Role stamped on records that do not carry their own "role" key.
        split: Split tag for the returned manifest.

    Returns:
        The manifest, records in file order.

    Raises:
        MalformedRecord: Bad JSON or an invalid record, with its 1-based line number.
        InvalidLabel: A label outside {-1, 0..9}.
        DuplicateUttId: The same utt_id on two lines.
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise MalformedRecord(f"Manifest {source} is not valid UTF-8", 0, str(e)) from e
    except OSError as e:
        raise IoFailure(f"Cannot read manifest {source}", str(e)) from e

    records: List[Utterance] = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecord(
                f"Line {line_number} of {source} is not valid JSON", line_number, str(e)
            ) from e
        if not isinstance(data, dict):
            raise MalformedRecord(
                f"Line {line_number} of {source} is not a JSON object", line_number
            )
        if "role" not in data and role is not None:
            data["role"] = role
        try:
            records.append(Utterance.model_validate(data))
        except ValidationError as e:
            raise MalformedRecord(
                f"Line {line_number} of {source} is not a valid record", line_number, str(e)
            ) from e

    manifest = Manifest(
        records=records,
        role=role if role is not None else _common_role(records),
        split=split,
        root=source.parent,
    )
    logger.debug(f"Loaded manifest {source} with {len(manifest)} records")
    return manifest


def _relative_feature_path(manifest: Manifest, record: Utterance, new_root: Path) -> str:
    target = manifest.resolve(record)
    return Path(os.path.relpath(target, start=new_root)).as_posix()


def write_manifest(manifest: Manifest, path: PathLike) -> None:
    """Write a manifest as JSON Lines, re-rooting feature paths at the file's directory."""
    target = Path(path)
    with_role = manifest.mixed_roles
    lines = []
    for record in manifest.records:
        moved = record.model_copy(
            update={"feature_path": _relative_feature_path(manifest, record, target.parent)}
        )
        lines.append(json.dumps(moved.to_record(with_role=with_role)))
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write manifest {target}", str(e)) from e


def manifest_digest(manifest: Manifest) -> str:
    """Stable content digest of a manifest's records."""
    digest = hashlib.sha256()
    for record in manifest.records:
        digest.update(json.dumps(record.to_record(with_role=True), sort_keys=True).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()[:16]


def merge_datasets(parts: Sequence[Manifest], check_dims: bool = True) -> Manifest:
    """
    Concatenate manifests in order, keeping each record's own role.

    Raises:
        DuplicateUttId: If an utt_id occurs in more than one part.
        DimensionMismatch: If the parts' feature files disagree on D.
    """
    if not parts:
        return Manifest(records=[])
    root = parts[0].root

    if check_dims:
        from protokws.datamodel.features import peek_feature_dim

        dims = {}
        for index, part in enumerate(parts):
            if part.records:
                dims[index] = peek_feature_dim(part.resolve(part.records[0]))
        if len(set(dims.values())) > 1:
            raise DimensionMismatch(
                "Cannot merge manifests with different feature dimensions",
                f"dimension per part: {dims}",
            )

    records = [
        record.model_copy(update={"feature_path": _relative_feature_path(part, record, root)})
        for part in parts
        for record in part.records
    ]
    splits = {p.split for p in parts}
    merged = Manifest(
        records=records,
        role=_common_role(records),
        split=splits.pop() if len(splits) == 1 else None,
        root=root,
    )
    logger.info(f"Merged {len(parts)} manifests into {len(merged)} records")
    return merged


def split_enrollment(
    enroll: Manifest, train_fraction: float = 0.8, seed: int = 0
) -> Tuple[Manifest, Manifest]:
    """
    Split an enrollment manifest into train and valid parts, stratified per class.

    A class with n utterances sends ceil(train_fraction * n) of them to train.
    Both outputs keep the input's record order.

    Raises:
        ClassTooSmall: If a class present in enroll has fewer than 2 utterances.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidConfig(f"train_fraction must be in (0, 1), got {train_fraction}")

    by_class: Dict[int, List[int]] = {}
    for index, record in enumerate(enroll.records):
        by_class.setdefault(record.label, []).append(index)
    small = [c for c, members in by_class.items() if len(members) < 2]
    if small:
        raise ClassTooSmall(
            f"Classes with fewer than 2 enrollment utterances: {sorted(small)}"
        )

    rng = np.random.default_rng(seed)
    train_indices: List[int] = []
    for class_id in CLASS_IDS:
        members = by_class.get(class_id)
        if not members:
            continue
        n_train = math.ceil(train_fraction * len(members) - 1e-9)
        order = rng.permutation(len(members))
        train_indices.extend(members[i] for i in order[:n_train])

    chosen = set(train_indices)
    train = [r for i, r in enumerate(enroll.records) if i in chosen]
    valid = [r for i, r in enumerate(enroll.records) if i not in chosen]
    return (
        Manifest(records=train, role=enroll.role, split=Split.TRAIN, root=enroll.root),
        Manifest(records=valid, role=enroll.role, split=Split.VALID, root=enroll.root),
    )
