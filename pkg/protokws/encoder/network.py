"""
Frame-wise two-layer ReLU encoder with a CE head and a CTC head.

Per frame t:  e_t = W2 relu(W1 f_t + b1) + b2
CE head:      Wce e_0 + bce            (first frame only)
CTC head:     Wctc e_t + bctc          (every frame)

All arithmetic runs in float64 whatever the parameter dtype.
"""

from dataclasses import dataclass, fields
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from protokws.datamodel.models import N_CLASSES, NON_KEYWORD, validate_label
from protokws.errors import DimMismatch, InvalidDims, NonFiniteValue, ShapeMismatch

# CTC dictionary: blank first, then the special tokens, keywords 0-9, non-keyword.
CTC_TOKENS: Tuple[str, ...] = (
    "<blank>", "<sos>", "<eos>", "<pad>",
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    "-1",
)
BLANK = 0
SPECIAL_TOKENS = frozenset({0, 1, 2, 3})
N_TOKENS = len(CTC_TOKENS)
_FIRST_KEYWORD_TOKEN = 4
NON_KEYWORD_TOKEN = 14


def label_token(label: int) -> int:
    """CTC token index for a class label."""
    label = validate_label(label)
    return NON_KEYWORD_TOKEN if label == NON_KEYWORD else _FIRST_KEYWORD_TOKEN + label


def token_label(token: int) -> Optional[int]:
    """Class label for a CTC token, or None for blank and special tokens."""
    if token in SPECIAL_TOKENS:
        return None
    if token == NON_KEYWORD_TOKEN:
        return NON_KEYWORD
    return token - _FIRST_KEYWORD_TOKEN


def param_shapes(d_in: int, hidden: int, d_emb: int) -> Dict[str, Tuple[int, ...]]:
    """Block shapes in checkpoint order."""
    return {
        "W1": (hidden, d_in),
        "b1": (hidden,),
        "W2": (d_emb, hidden),
        "b2": (d_emb,),
        "Wce": (N_CLASSES, d_emb),
        "bce": (N_CLASSES,),
        "Wctc": (N_TOKENS, d_emb),
        "bctc": (N_TOKENS,),
    }


@dataclass
class EncoderParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    Wce: np.ndarray
    bce: np.ndarray
    Wctc: np.ndarray
    bctc: np.ndarray

    @classmethod
    def names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.names():
            yield name, getattr(self, name)

    @property
    def dims(self) -> Tuple[int, int, int]:
        """(D_in, H, D_emb)."""
        hidden, d_in = self.W1.shape
        return d_in, hidden, self.W2.shape[0]

    def expected_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return param_shapes(*self.dims)

    def validate(self) -> None:
        """
        Raises:
            ShapeMismatch: If any block disagrees with the dims implied by W1 and W2.
            NonFiniteValue: If any entry is NaN or Inf.
        """
        if self.W1.ndim != 2 or self.W2.ndim != 2:
            raise ShapeMismatch("W1 and W2 must be matrices")
        for name, shape in self.expected_shapes().items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise ShapeMismatch(f"Parameter {name} has shape {actual}, expected {shape}")
        for name, value in self.items():
            if not np.all(np.isfinite(value)):
                raise NonFiniteValue(f"Parameter {name} contains NaN or Inf")

    def astype(self, dtype: type) -> "EncoderParams":
        return EncoderParams(**{n: np.asarray(v, dtype=dtype) for n, v in self.items()})

    def copy(self) -> "EncoderParams":
        return EncoderParams(**{n: v.copy() for n, v in self.items()})

    def zeros_like(self, dtype: type = np.float64) -> "EncoderParams":
        return EncoderParams(**{n: np.zeros(v.shape, dtype=dtype) for n, v in self.items()})

    def bitwise_equal(self, other: "EncoderParams") -> bool:
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for (_, a), (_, b) in zip(self.items(), other.items())
        )


@dataclass
class EncoderOutput:
    embeddings: np.ndarray  # (T, D_emb)
    ce_logits: np.ndarray  # (11,)
    ctc_logits: np.ndarray  # (T, 15)


@dataclass
class OutputGrads:
    """Upstream gradients with respect to one utterance's encoder outputs."""

    embeddings: Optional[np.ndarray] = None
    ce_logits: Optional[np.ndarray] = None
    ctc_logits: Optional[np.ndarray] = None


def init_encoder(d_in: int, hidden: int, d_emb: int, seed: int) -> EncoderParams:
    """
    Draw weights from N(0, 1/fan_in) and zero every bias.

    Returns float32 parameters; identical arguments give identical bits.

    Raises:
        InvalidDims: If any dimension is below 1.
    """
    if min(d_in, hidden, d_emb) < 1:
        raise InvalidDims(f"Encoder dims must be >= 1, got ({d_in}, {hidden}, {d_emb})")
    rng = np.random.default_rng(seed)

    def weights(rows: int, fan_in: int) -> np.ndarray:
        return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(rows, fan_in)).astype(np.float32)

    return EncoderParams(
        W1=weights(hidden, d_in),
        b1=np.zeros(hidden, dtype=np.float32),
        W2=weights(d_emb, hidden),
        b2=np.zeros(d_emb, dtype=np.float32),
        Wce=weights(N_CLASSES, d_emb),
        bce=np.zeros(N_CLASSES, dtype=np.float32),
        Wctc=weights(N_TOKENS, d_emb),
        bctc=np.zeros(N_TOKENS, dtype=np.float32),
    )


def _stack(params: EncoderParams, batch: Sequence[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    d_in = params.dims[0]
    matrices = []
    for feats in batch:
        frames = np.asarray(feats, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] != d_in:
            raise DimMismatch(
                f"Features must be T x {d_in} with T >= 1", f"got shape {frames.shape}"
            )
        matrices.append(frames)
    offsets = np.cumsum([0] + [m.shape[0] for m in matrices])
    return np.vstack(matrices), offsets


def _frames_forward(
    p: EncoderParams, frames: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    pre = frames @ p.W1.T + p.b1
    hidden = np.maximum(pre, 0.0)
    emb = hidden @ p.W2.T + p.b2
    return pre, hidden, emb


def forward_batch(params: EncoderParams, batch: Sequence[np.ndarray]) -> List[EncoderOutput]:
    """Run the encoder over several utterances with one stacked matmul per layer."""
    p = params.astype(np.float64)
    frames, offsets = _stack(params, batch)
    _, _, emb = _frames_forward(p, frames)
    ctc = emb @ p.Wctc.T + p.bctc
    ce = emb[offsets[:-1]] @ p.Wce.T + p.bce
    return [
        EncoderOutput(embeddings=emb[start:end], ce_logits=ce[i], ctc_logits=ctc[start:end])
        for i, (start, end) in enumerate(zip(offsets[:-1], offsets[1:]))
    ]


def forward(params: EncoderParams, feats: np.ndarray) -> EncoderOutput:
    """
    Encode one utterance.

    Raises:
        DimMismatch: If feats is not a T x D_in matrix.
    """
    return forward_batch(params, [feats])[0]


def utterance_embedding(embeddings: np.ndarray) -> np.ndarray:
    """The first-frame embedding, which stands for the whole utterance."""
    return embeddings[0]


def backward_batch(
    params: EncoderParams,
    batch: Sequence[np.ndarray],
    upstream: Sequence[OutputGrads],
) -> EncoderParams:
    """
    Gradients of sum_i <upstream_i, outputs_i> with respect to every parameter.

    Returns:
        float64 EncoderParams holding the summed gradients.
    """
    if len(batch) != len(upstream):
        raise DimMismatch("backward needs one upstream gradient per utterance")
    p = params.astype(np.float64)
    frames, offsets = _stack(params, batch)
    pre, hidden, emb = _frames_forward(p, frames)
    firsts = offsets[:-1]

    d_emb = np.zeros_like(emb)
    d_ctc = np.zeros((frames.shape[0], N_TOKENS))
    d_ce = np.zeros((len(batch), N_CLASSES))
    for i, grads in enumerate(upstream):
        start, end = offsets[i], offsets[i + 1]
        n_frames = end - start
        if grads.embeddings is not None:
            d_emb[start:end] = _checked(grads.embeddings, (n_frames, emb.shape[1]), "embeddings")
        if grads.ctc_logits is not None:
            d_ctc[start:end] = _checked(grads.ctc_logits, (n_frames, N_TOKENS), "ctc_logits")
        if grads.ce_logits is not None:
            d_ce[i] = _checked(grads.ce_logits, (N_CLASSES,), "ce_logits")

    d_emb += d_ctc @ p.Wctc
    d_emb[firsts] += d_ce @ p.Wce
    d_pre = (d_emb @ p.W2) * (pre > 0.0)
    return EncoderParams(
        W1=d_pre.T @ frames,
        b1=d_pre.sum(axis=0),
        W2=d_emb.T @ hidden,
        b2=d_emb.sum(axis=0),
        Wce=d_ce.T @ emb[firsts],
        bce=d_ce.sum(axis=0),
        Wctc=d_ctc.T @ emb,
        bctc=d_ctc.sum(axis=0),
    )


def backward(params: EncoderParams, feats: np.ndarray, upstream: OutputGrads) -> EncoderParams:
    """Exact analytic gradients for one utterance."""
    return backward_batch(params, [feats], [upstream])


def _checked(value: np.ndarray, shape: Tuple[int, ...], name: str) -> np.ndarray:
    array = np.asarray(value, dtype=np.float64)
    if array.shape != shape:
        raise DimMismatch(f"Upstream gradient for {name} has shape {array.shape}, expected {shape}")
    return array
