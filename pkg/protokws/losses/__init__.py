from protokws.losses.ce import ce_loss
from protokws.losses.combined import LossBase, LossResult, LossSetting, combined_loss
from protokws.losses.ctc import ctc_loss
from protokws.losses.scl import SclConfig, scl_loss

__all__ = [
    "ce_loss",
    "ctc_loss",
    "scl_loss",
    "SclConfig",
    "LossBase",
    "LossResult",
    "LossSetting",
    "combined_loss",
]
