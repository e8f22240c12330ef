"""
Deterministic synthetic corpora standing in for control, dysarthric, target
and TTS keyword speech.

Frame 0 of every utterance carries the class signal; later frames are
jittered copies of it. The feature space is split into a content subspace,
where class centroids live, and a nuisance subspace that dysarthric speech
fills with speaker-independent distortion.
"""

from pathlib import Path
from typing import Dict, List, Literal, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import Field, model_validator

from protokws.config import ConfigModel, derive_seed
from protokws.datamodel.features import write_features
from protokws.datamodel.manifest import Manifest, Utterance
from protokws.datamodel.models import CLASS_IDS, KEYWORD_IDS, N_CLASSES, NON_KEYWORD, Role, Split
from protokws.errors import InvalidConfig

PathLike = Union[str, Path]
TTS_PREFIX = "tts-"


class CorpusConfig(ConfigModel):
    feature_dim: int = Field(default=24, ge=2)
    frames_range: Tuple[int, int] = (4, 8)
    n_classes: Literal[11] = 11
    class_separation: float = Field(default=14.0, gt=0.0)
    speaker_offset_scale: float = Field(default=1.5, ge=0.0)
    dysarthria_severity: float = Field(default=1.0, ge=0.0)
    samples_per_class: int = Field(default=6, ge=1)
    seed: int = 0
    noise_scale: float = Field(default=0.5, ge=0.0)
    drift_scale: float = Field(default=1.5, ge=0.0)
    nuisance_scale: float = Field(default=3.0, ge=0.0)
    jitter_scale: float = Field(default=0.5, ge=0.0)

    @model_validator(mode="after")
    def _check_frames(self) -> "CorpusConfig":
        low, high = self.frames_range
        if low < 1 or low > high:
            raise ValueError(f"frames_range must satisfy 1 <= min <= max, got {self.frames_range}")
        return self

    @property
    def content_dim(self) -> int:
        return (self.feature_dim + 1) // 2


def class_tag(label: int) -> str:
    return "nk" if label == NON_KEYWORD else f"k{label}"


def class_centroids(config: CorpusConfig) -> np.ndarray:
    """
    Return the (11, feature_dim) class centroids.

    Centroids sit in the content subspace at pairwise distance
    class_separation (exact when the subspace has at least 11 dims).
    """
    rng = np.random.default_rng(derive_seed(config.seed, "centroids"))
    draws = rng.standard_normal((N_CLASSES, config.content_dim))
    if config.content_dim >= N_CLASSES:
        basis, _ = np.linalg.qr(draws.T)
        directions = basis.T
    else:
        directions = draws / np.linalg.norm(draws, axis=1, keepdims=True)
    centroids = np.zeros((N_CLASSES, config.feature_dim))
    centroids[:, : config.content_dim] = directions * (config.class_separation / np.sqrt(2.0))
    return centroids


def _speaker_latents(
    config: CorpusConfig, speaker_id: str, severity: float
) -> Tuple[np.ndarray, np.ndarray]:
    # Depends only on (seed, speaker) so enrollment and evaluation share it.
    rng = np.random.default_rng(derive_seed(config.seed, f"speaker:{speaker_id}"))
    offset = rng.standard_normal(config.feature_dim) * config.speaker_offset_scale
    drift = np.zeros((N_CLASSES, config.feature_dim))
    drift[:, : config.content_dim] = (
        rng.standard_normal((N_CLASSES, config.content_dim)) * config.drift_scale * severity
    )
    return offset, drift


def _draw_utterance(
    config: CorpusConfig,
    rng: np.random.Generator,
    center: np.ndarray,
    severity: float,
) -> np.ndarray:
    low, high = config.frames_range
    n_frames = int(rng.integers(low, high + 1))
    first = center + rng.standard_normal(config.feature_dim) * config.noise_scale * (1.0 + severity)
    nuisance = rng.standard_normal(config.feature_dim - config.content_dim)
    first[config.content_dim :] += nuisance * config.nuisance_scale * severity
    jitter = rng.standard_normal((n_frames - 1, config.feature_dim)) * config.jitter_scale
    frames = np.vstack([first[None, :], first[None, :] + jitter])
    return frames.astype(np.float32)


def _emit(
    out_dir: Path,
    role: Role,
    speaker_id: str,
    utt_id: str,
    label: int,
    frames: np.ndarray,
) -> Utterance:
    relative = f"feats/{role.value}/{speaker_id}/{utt_id}.pkws"
    write_features(frames, out_dir / relative)
    return Utterance(utt_id=utt_id, speaker=speaker_id, label=label, features=relative, role=role)


def generate_corpus(
    config: CorpusConfig,
    role: Role,
    speaker_ids: Sequence[str],
    out_dir: PathLike,
    split: Split = Split.TRAIN,
) -> Manifest:
    """
    Generate samples_per_class utterances per class for every speaker.

    Feature files are written under out_dir; the returned manifest is rooted
    there. Output is bitwise identical for identical arguments.

    Raises:
        InvalidConfig: If speaker_ids is empty or repeats an id.
    """
    if not speaker_ids:
        raise InvalidConfig("generate_corpus needs at least one speaker")
    if len(set(speaker_ids)) != len(speaker_ids):
        raise InvalidConfig(f"Duplicate speaker ids: {list(speaker_ids)}")

    root = Path(out_dir)
    severity = config.dysarthria_severity if role.dysarthric else 0.0
    centroids = class_centroids(config)
    records: List[Utterance] = []
    for speaker_id in speaker_ids:
        offset, drift = _speaker_latents(config, speaker_id, severity)
        seed_label = f"utterances:{role.value}:{speaker_id}"
        rng = np.random.default_rng(derive_seed(config.seed, seed_label))
        for index, label in enumerate(CLASS_IDS):
            center = centroids[index] + offset + drift[index]
            for sample in range(config.samples_per_class):
                utt_id = f"{role.value}-{speaker_id}-{class_tag(label)}-{sample:03d}"
                frames = _draw_utterance(config, rng, center, severity)
                records.append(_emit(root, role, speaker_id, utt_id, label, frames))

    logger.info(
        f"Generated {len(records)} {role.value} utterances for {len(speaker_ids)} speaker(s)"
    )
    return Manifest(records=records, role=role, split=split, root=root)


def generate_augment_keywords(
    config: CorpusConfig,
    n_per_keyword: int,
    out_dir: PathLike,
    n_voices: int = 4,
) -> Manifest:
    """
    Generate keyword-only samples from clean synthetic "tts-" voices.

    No non-keyword utterances are produced. Utterance j of each keyword is
    spoken by voice tts-(j mod n_voices).
    """
    if n_per_keyword < 1:
        raise InvalidConfig(f"n_per_keyword must be >= 1, got {n_per_keyword}")
    if n_voices < 1:
        raise InvalidConfig(f"n_voices must be >= 1, got {n_voices}")

    root = Path(out_dir)
    centroids = class_centroids(config)
    names = [f"{TTS_PREFIX}{k}" for k in range(n_voices)]
    voices: Dict[str, Tuple[np.ndarray, np.ndarray]] = {
        name: _speaker_latents(config, name, 0.0) for name in names
    }
    rng = np.random.default_rng(derive_seed(config.seed, "utterances:augment"))
    records: List[Utterance] = []
    for label in KEYWORD_IDS:
        for sample in range(n_per_keyword):
            voice = f"{TTS_PREFIX}{sample % n_voices}"
            offset, _ = voices[voice]
            utt_id = f"augment-{voice}-{class_tag(label)}-{sample:03d}"
            frames = _draw_utterance(config, rng, centroids[label] + offset, 0.0)
            records.append(_emit(root, Role.CONTROL, voice, utt_id, label, frames))

    logger.info(f"Generated {len(records)} synthetic keyword utterances")
    return Manifest(records=records, role=Role.CONTROL, split=Split.TRAIN, root=root)
