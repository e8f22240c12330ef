from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence

import numpy as np
from pydantic import ConfigDict

from protokws.config import ConfigModel
from protokws.encoder.network import EncoderOutput, OutputGrads, label_token, utterance_embedding
from protokws.errors import InvalidConfig
from protokws.losses.ce import ce_loss
from protokws.losses.ctc import ctc_loss
from protokws.losses.scl import SclConfig, scl_loss


class LossBase(str, Enum):
    CE = "ce"
    CTC = "ctc"


class LossSetting(ConfigModel):
    """Base loss plus an optional, equally weighted supervised contrastive term."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    base: LossBase = LossBase.CE
    add_scl: bool = False

    @property
    def tag(self) -> str:
        return f"{self.base.value}+scl" if self.add_scl else self.base.value

    @classmethod
    def parse(cls, text: str) -> "LossSetting":
        """Parse "ce", "ctc", "ce+scl" or "ctc+scl"."""
        parts = text.strip().lower().split("+")
        try:
            base = LossBase(parts[0])
        except ValueError:
            raise InvalidConfig(f"Unknown loss base '{parts[0]}'", text) from None
        if parts[1:] not in ([], ["scl"]):
            raise InvalidConfig(f"Unknown loss setting '{text}'")
        return cls(base=base, add_scl=len(parts) == 2)


@dataclass
class LossResult:
    total: float
    base: float
    scl: float
    grads: List[OutputGrads] = field(default_factory=list)


def combined_loss(
    setting: LossSetting,
    outputs: Sequence[EncoderOutput],
    labels: Sequence[int],
    scl: SclConfig = SclConfig(),
) -> LossResult:
    """
    Sum the base loss over the batch and, when enabled, add SCL on the
    first-frame embeddings with weight 1.

    A batch of one skips the SCL term since no anchor can have a positive.
    """
    if len(outputs) != len(labels):
        raise InvalidConfig("combined_loss needs one label per model output")

    base_total = 0.0
    grads: List[OutputGrads] = []
    for output, label in zip(outputs, labels):
        if setting.base is LossBase.CE:
            value, grad = ce_loss(output.ce_logits, label)
            grads.append(OutputGrads(ce_logits=grad))
        else:
            value, grad = ctc_loss(output.ctc_logits, [label_token(label)])
            grads.append(OutputGrads(ctc_logits=grad))
        base_total += value

    scl_total = 0.0
    if setting.add_scl and len(outputs) >= 2:
        firsts = np.stack([utterance_embedding(o.embeddings) for o in outputs])
        scl_total, scl_grad = scl_loss(firsts, list(labels), scl)
        for i, output in enumerate(outputs):
            d_emb = np.zeros_like(output.embeddings, dtype=np.float64)
            d_emb[0] = scl_grad[i]
            grads[i].embeddings = d_emb

    return LossResult(
        total=base_total + scl_total, base=base_total, scl=scl_total, grads=grads
    )
