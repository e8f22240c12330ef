from protokws.encoder.network import (
    BLANK,
    CTC_TOKENS,
    N_TOKENS,
    NON_KEYWORD_TOKEN,
    SPECIAL_TOKENS,
    EncoderOutput,
    EncoderParams,
    OutputGrads,
    backward,
    backward_batch,
    forward,
    forward_batch,
    init_encoder,
    label_token,
    param_shapes,
    token_label,
    utterance_embedding,
)
from protokws.encoder.checkpoint import (
    EncoderCheckpoint,
    checkpoint_bytes,
    checkpoint_digest,
    checkpoint_from_bytes,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "BLANK",
    "CTC_TOKENS",
    "N_TOKENS",
    "NON_KEYWORD_TOKEN",
    "SPECIAL_TOKENS",
    "EncoderOutput",
    "EncoderParams",
    "OutputGrads",
    "backward",
    "backward_batch",
    "forward",
    "forward_batch",
    "init_encoder",
    "label_token",
    "param_shapes",
    "token_label",
    "utterance_embedding",
    "EncoderCheckpoint",
    "checkpoint_bytes",
    "checkpoint_digest",
    "checkpoint_from_bytes",
    "load_checkpoint",
    "save_checkpoint",
]
