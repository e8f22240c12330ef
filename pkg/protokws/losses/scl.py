"""
Supervised contrastive loss over a batch of embeddings.

Embeddings are L2-normalised; for anchor i with positives P(i) and
candidates A(i) = everything but i,

    L_i = -1/|P(i)| * sum_p log( exp(z_i.z_p / tau) / sum_a exp(z_i.z_a / tau) )

Anchors without an in-batch positive contribute 0. The batch loss is the sum.
"""

from typing import Hashable, Sequence, Tuple

import numpy as np
from pydantic import Field
from scipy.special import log_softmax

from protokws.config import ConfigModel
from protokws.errors import BatchTooSmall, NonFiniteLogits, ZeroEmbedding


class SclConfig(ConfigModel):
    temperature: float = Field(default=0.07, gt=0.0)


def scl_loss(
    embeddings: np.ndarray,
    labels: Sequence[Hashable],
    config: SclConfig = SclConfig(),
) -> Tuple[float, np.ndarray]:
    """
    Returns:
        (loss, gradient w.r.t. the raw, unnormalised embeddings).

    Raises:
        BatchTooSmall: Fewer than two embeddings.
        ZeroEmbedding: An embedding has zero norm.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise BatchTooSmall(f"SCL needs a batch of at least 2 embeddings, got shape {x.shape}")
    if len(labels) != x.shape[0]:
        raise BatchTooSmall("SCL needs one label per embedding")
    if not np.all(np.isfinite(x)):
        raise NonFiniteLogits("SCL embeddings contain NaN or Inf")
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise ZeroEmbedding("SCL cannot normalise a zero embedding")

    tau = config.temperature
    z = x / norms[:, None]
    sim = (z @ z.T) / tau
    np.fill_diagonal(sim, -np.inf)
    log_q = log_softmax(sim, axis=1)

    positives = np.array([[a == b for b in labels] for a in labels], dtype=bool)
    np.fill_diagonal(positives, False)
    counts = positives.sum(axis=1)
    anchors = counts > 0
    safe_counts = np.maximum(counts, 1)[:, None]

    per_anchor = -np.where(positives, log_q, 0.0).sum(axis=1) / safe_counts[:, 0]
    loss = float(per_anchor[anchors].sum())

    # d loss / d sim
    weights = np.exp(log_q) - positives / safe_counts
    weights[~anchors] = 0.0
    dz = (weights + weights.T) @ z / tau
    grad = (dz - z * np.sum(z * dz, axis=1, keepdims=True)) / norms[:, None]
    return loss, grad
