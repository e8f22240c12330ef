from abc import ABC, abstractmethod
from enum import Enum
from typing import Dict, Optional

import numpy as np

from protokws.encoder.network import EncoderParams
from protokws.errors import InvalidConfig


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


def warmup_lr(peak_lr: float, warmup_steps: int, step: int) -> float:
    """Linear warmup to peak_lr, then constant."""
    if step < 0:
        raise InvalidConfig(f"Schedule step must be >= 0, got {step}")
    if warmup_steps == 0:
        return peak_lr
    return peak_lr * min(1.0, step / warmup_steps)


class Optimizer(ABC):
    """
    Stateful update rule. Updates are computed in float64 and the new
    parameters are returned as float32.
    """

    @abstractmethod
    def update(self, params: EncoderParams, grads: EncoderParams, lr: float) -> EncoderParams:
        """Return the parameters after one step of size lr."""


class Sgd(Optimizer):
    def update(self, params: EncoderParams, grads: EncoderParams, lr: float) -> EncoderParams:
        return EncoderParams(
            **{
                name: (value.astype(np.float64) - lr * getattr(grads, name)).astype(np.float32)
                for name, value in params.items()
            }
        )


class Adam(Optimizer):
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Optional[Dict[str, np.ndarray]] = None
        self._v: Optional[Dict[str, np.ndarray]] = None

    def update(self, params: EncoderParams, grads: EncoderParams, lr: float) -> EncoderParams:
        if self._m is None or self._v is None:
            self._m = {name: np.zeros(value.shape) for name, value in params.items()}
            self._v = {name: np.zeros(value.shape) for name, value in params.items()}
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t

        updated = {}
        for name, value in params.items():
            g = np.asarray(getattr(grads, name), dtype=np.float64)
            self._m[name] = self.beta1 * self._m[name] + (1.0 - self.beta1) * g
            self._v[name] = self.beta2 * self._v[name] + (1.0 - self.beta2) * g * g
            m_hat = self._m[name] / correction1
            v_hat = self._v[name] / correction2
            step = lr * m_hat / (np.sqrt(v_hat) + self.eps)
            updated[name] = (value.astype(np.float64) - step).astype(np.float32)
        return EncoderParams(**updated)


def make_optimizer(kind: OptimizerKind) -> Optimizer:
    if kind is OptimizerKind.SGD:
        return Sgd()
    return Adam()
