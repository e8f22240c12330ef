import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
from loguru import logger

from protokws.datamodel.features import FeatureDataset, load_dataset
from protokws.datamodel.manifest import Manifest, manifest_digest
from protokws.datamodel.models import CLASS_IDS, FeatureMode, validate_label
from protokws.encoder.checkpoint import EncoderCheckpoint, checkpoint_digest
from protokws.encoder.network import forward, utterance_embedding
from protokws.errors import (
    EmptyEnrollment,
    IoFailure,
    MalformedRecord,
    MissingClass,
    ZeroPrototype,
    ZeroVector,
)

EnrollmentData = Union[Manifest, FeatureDataset]
PathLike = Union[str, Path]


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """
    Raises:
        ZeroVector: If either vector has zero norm.
    """
    u = np.asarray(a, dtype=np.float64)
    v = np.asarray(b, dtype=np.float64)
    norm_u = float(np.linalg.norm(u))
    norm_v = float(np.linalg.norm(v))
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroVector("Cosine similarity is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def embed_utterance(
    ckpt: EncoderCheckpoint, feats: np.ndarray, mode: FeatureMode = FeatureMode.FIRST_FRAME
) -> np.ndarray:
    """One vector per utterance: the first-frame embedding, or the frame mean."""
    embeddings = forward(ckpt.params, feats).embeddings
    if mode is FeatureMode.MEAN:
        return embeddings.mean(axis=0)
    return utterance_embedding(embeddings)


def _enrollment(enroll: EnrollmentData) -> FeatureDataset:
    return enroll if isinstance(enroll, FeatureDataset) else load_dataset(enroll)


def _enroll_digest(enroll: EnrollmentData) -> str:
    manifest = enroll if isinstance(enroll, Manifest) else Manifest(records=list(enroll.records))
    return manifest_digest(manifest)


@dataclass
class PrototypeSet:
    """One mean embedding per class plus the digests of what produced it."""

    prototypes: Dict[int, np.ndarray]
    checkpoint: str = ""
    enroll: str = ""
    feature_mode: FeatureMode = FeatureMode.FIRST_FRAME

    def __post_init__(self) -> None:
        missing = [c for c in CLASS_IDS if c not in self.prototypes]
        if missing:
            raise MissingClass(missing)
        extra = sorted(set(self.prototypes) - set(CLASS_IDS))
        if extra:
            raise MalformedRecord(f"Prototype set has unknown classes {extra}")
        self.prototypes = {
            c: np.asarray(self.prototypes[c], dtype=np.float64) for c in CLASS_IDS
        }
        dims = {p.shape for p in self.prototypes.values()}
        if len(dims) != 1 or len(dims.pop()) != 1:
            raise MalformedRecord("Prototypes must be vectors of one common length")
        for class_id, vector in self.prototypes.items():
            if not np.all(np.isfinite(vector)) or not np.any(vector):
                raise ZeroPrototype(f"Prototype for class {class_id} is zero or non-finite")

    def __getitem__(self, class_id: int) -> np.ndarray:
        return self.prototypes[class_id]

    @property
    def dim(self) -> int:
        return int(self.prototypes[CLASS_IDS[0]].shape[0])


def build_prototypes(
    enroll: EnrollmentData,
    ckpt: EncoderCheckpoint,
    mode: FeatureMode = FeatureMode.FIRST_FRAME,
) -> PrototypeSet:
    """
    Average the enrollment embeddings of each class.

    Raises:
        MissingClass: If any of the 11 classes has no enrollment utterance.
        ZeroPrototype: If a class mean is the zero vector.
    """
    dataset = _enrollment(enroll)
    by_class: Dict[int, List[np.ndarray]] = {c: [] for c in CLASS_IDS}
    for record, feats in zip(dataset.records, dataset.features):
        by_class[record.label].append(embed_utterance(ckpt, feats, mode))
    missing = [c for c, members in by_class.items() if not members]
    if missing:
        raise MissingClass(missing)

    protos = PrototypeSet(
        prototypes={c: np.mean(np.stack(members), axis=0) for c, members in by_class.items()},
        checkpoint=checkpoint_digest(ckpt),
        enroll=_enroll_digest(enroll),
        feature_mode=mode,
    )
    logger.info(f"Built {len(CLASS_IDS)} prototypes from {len(dataset)} enrollment utterances")
    return protos


@dataclass
class EnrollmentIndex:
    """Embedded enrollment utterances, for nearest-neighbour search."""

    labels: List[int]
    embeddings: List[np.ndarray] = field(default_factory=list)
    feature_mode: FeatureMode = FeatureMode.FIRST_FRAME

    def __len__(self) -> int:
        return len(self.labels)


def build_enrollment_index(
    enroll: EnrollmentData,
    ckpt: EncoderCheckpoint,
    mode: FeatureMode = FeatureMode.FIRST_FRAME,
) -> EnrollmentIndex:
    dataset = _enrollment(enroll)
    if len(dataset) == 0:
        raise EmptyEnrollment("KNN classification needs at least one enrollment utterance")
    return EnrollmentIndex(
        labels=dataset.labels,
        embeddings=[embed_utterance(ckpt, feats, mode) for feats in dataset.features],
        feature_mode=mode,
    )


def prototypes_to_json(protos: PrototypeSet) -> str:
    payload = {
        "checkpoint": protos.checkpoint,
        "enroll": protos.enroll,
        "feature_mode": protos.feature_mode.value,
        "prototypes": {str(c): protos[c].tolist() for c in CLASS_IDS},
    }
    return json.dumps(payload, indent=2) + "\n"


def prototypes_from_json(text: str, source: str = "<string>") -> PrototypeSet:
    try:
        payload = json.loads(text)
        vectors = {validate_label(int(k)): v for k, v in payload["prototypes"].items()}
        return PrototypeSet(
            prototypes=vectors,
            checkpoint=str(payload.get("checkpoint", "")),
            enroll=str(payload.get("enroll", "")),
            feature_mode=FeatureMode(payload.get("feature_mode", FeatureMode.FIRST_FRAME.value)),
        )
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise MalformedRecord(f"Invalid prototype file {source}", developer_message=str(e)) from e


def save_prototypes(protos: PrototypeSet, path: PathLike) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(prototypes_to_json(protos), encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot write prototypes {target}", str(e)) from e
    logger.info(f"Saved prototypes to {target}")


def load_prototypes(path: PathLike) -> PrototypeSet:
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"Cannot read prototypes {source}", str(e)) from e
    return prototypes_from_json(text, str(source))

