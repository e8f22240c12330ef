from typing import Tuple

import numpy as np
from scipy.special import log_softmax

from protokws.datamodel.models import N_CLASSES, class_index
from protokws.errors import DimMismatch, NonFiniteLogits


def ce_loss(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """
    Multi-class softmax cross-entropy over the 11 classes.

    Args:
        logits: Length-11 vector; row 10 is the non-keyword class.
        label: Class id in {-1, 0..9}.

    Returns:
        (loss, gradient w.r.t. logits) with gradient softmax(logits) - onehot(label).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape != (N_CLASSES,):
        raise DimMismatch(f"CE logits must have shape ({N_CLASSES},), got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteLogits("CE logits contain NaN or Inf")
    index = class_index(label)
    log_probs = log_softmax(z)
    grad = np.exp(log_probs)
    grad[index] -= 1.0
    return float(-log_probs[index]), grad
