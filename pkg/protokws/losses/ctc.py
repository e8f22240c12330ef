"""CTC loss by log-space forward-backward over the blank-extended target."""

from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax

from protokws.encoder.network import BLANK
from protokws.errors import InvalidLabel, NonFiniteLogits, NonFiniteLoss, TargetTooLong


def _extend(target: Sequence[int], blank: int) -> List[int]:
    extended = [blank]
    for token in target:
        extended.extend([token, blank])
    return extended


def ctc_loss(
    logit_seq: np.ndarray, target: Sequence[int], blank: int = BLANK
) -> Tuple[float, np.ndarray]:
    """
    Negative log-probability of target summed over all CTC alignments.

    Args:
        logit_seq: (T, V) per-frame logits; -inf marks an impossible token.
        target: Token indices, none of them blank.
        blank: Index of the blank token.

    Returns:
        (loss, gradient w.r.t. logit_seq).

    Raises:
        TargetTooLong: If T frames cannot hold the target and its repeat separators.
        NonFiniteLoss: If no alignment has nonzero probability.
    """
    y = np.asarray(logit_seq, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 1:
        raise NonFiniteLogits(f"CTC logits must be a non-empty T x V matrix, got {y.shape}")
    n_frames, n_tokens = y.shape
    if np.any(np.isnan(y)) or np.any(np.isposinf(y)) or not np.all(np.isfinite(y).any(axis=1)):
        raise NonFiniteLogits("CTC logits contain NaN, +Inf or an all -Inf frame")

    tokens = [int(t) for t in target]
    for token in tokens:
        if token == blank or not 0 <= token < n_tokens:
            raise InvalidLabel(f"CTC target token {token} is blank or outside the inventory")
    repeats = sum(1 for a, b in zip(tokens, tokens[1:]) if a == b)
    if n_frames < len(tokens) + repeats:
        raise TargetTooLong(
            f"Target of length {len(tokens)} needs {len(tokens) + repeats} frames, got {n_frames}"
        )

    log_probs = log_softmax(y, axis=1)
    extended = _extend(tokens, blank)
    n_states = len(extended)
    skip = np.zeros(n_states, dtype=bool)
    for s in range(2, n_states):
        skip[s] = extended[s] != blank and extended[s] != extended[s - 2]
    emit = log_probs[:, extended]

    alpha = np.full((n_frames, n_states), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if n_states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, n_frames):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    log_p = alpha[-1, -1] if n_states == 1 else np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    if not np.isfinite(log_p):
        raise NonFiniteLoss("CTC target has zero probability under the given logits")

    beta = np.full((n_frames, n_states), -np.inf)
    beta[-1, -1] = 0.0
    if n_states > 1:
        beta[-1, -2] = 0.0
    for t in range(n_frames - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    occupancy = np.exp(alpha + beta - log_p)
    posterior = np.zeros_like(y)
    for s, token in enumerate(extended):
        posterior[:, token] += occupancy[:, s]
    grad = np.exp(log_probs) - posterior
    return float(-log_p), grad
