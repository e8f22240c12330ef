from pathlib import Path
from typing import Callable, List, Optional, Sequence

import numpy as np
import pytest

from protokws.datamodel.features import FeatureDataset, write_features
from protokws.datamodel.manifest import Manifest, Utterance
from protokws.datamodel.models import N_CLASSES, Role, Stage
from protokws.encoder.checkpoint import EncoderCheckpoint
from protokws.encoder.network import N_TOKENS, EncoderParams

FD_STEP = 1e-5


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray) -> np.ndarray:
    """Numerical gradient of a scalar function, perturbing one float64 entry at a time."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        saved = x[index]
        x[index] = saved + FD_STEP
        upper = f(x)
        x[index] = saved - FD_STEP
        lower = f(x)
        x[index] = saved
        grad[index] = (upper - lower) / (2 * FD_STEP)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64)
    b = np.asarray(numeric, dtype=np.float64)
    scale = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-8)
    return float(np.linalg.norm(a - b) / scale)


def projection_params(d_in: int, keep: int) -> EncoderParams:
    """
    Parameters whose embedding is exactly the first `keep` input dims:
    relu(x) - relu(-x) = x. Both heads output zeros.
    """
    eye = np.eye(keep, d_in)
    return EncoderParams(
        W1=np.vstack([eye, -eye]).astype(np.float32),
        b1=np.zeros(2 * keep, dtype=np.float32),
        W2=np.hstack([np.eye(keep), -np.eye(keep)]).astype(np.float32),
        b2=np.zeros(keep, dtype=np.float32),
        Wce=np.zeros((N_CLASSES, keep), dtype=np.float32),
        bce=np.zeros(N_CLASSES, dtype=np.float32),
        Wctc=np.zeros((N_TOKENS, keep), dtype=np.float32),
        bctc=np.zeros(N_TOKENS, dtype=np.float32),
    )


def projection_checkpoint(d_in: int, keep: Optional[int] = None) -> EncoderCheckpoint:
    return EncoderCheckpoint(params=projection_params(d_in, keep or d_in), stage=Stage.SID)


def make_dataset(
    firsts: Sequence[Sequence[float]],
    labels: Sequence[int],
    speaker: str = "S1",
    n_frames: int = 1,
) -> FeatureDataset:
    """In-memory dataset whose utterances repeat the given first frame."""
    records: List[Utterance] = []
    features: List[np.ndarray] = []
    for i, (first, label) in enumerate(zip(firsts, labels)):
        utt_id = f"{speaker}-{i:03d}"
        records.append(
            Utterance(utt_id=utt_id, speaker=speaker, label=label, features=f"{utt_id}.pkws")
        )
        row = np.asarray(first, dtype=np.float32)
        features.append(np.tile(row, (n_frames, 1)))
    return FeatureDataset(records=records, features=features)


def write_manifest_files(
    root: Path,
    matrices: Sequence[np.ndarray],
    labels: Sequence[int],
    speaker: str = "S1",
    role: Optional[Role] = None,
) -> Manifest:
    """Write feature files under root and return a manifest rooted there."""
    records = []
    for i, (matrix, label) in enumerate(zip(matrices, labels)):
        utt_id = f"{speaker}-{i:03d}"
        relative = f"feats/{utt_id}.pkws"
        write_features(matrix, root / relative)
        records.append(
            Utterance(utt_id=utt_id, speaker=speaker, label=label, features=relative, role=role)
        )
    return Manifest(records=records, role=role, root=root)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
