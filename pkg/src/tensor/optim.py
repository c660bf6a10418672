"""RMSProp with a reduce-on-plateau learning-rate schedule."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from .tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """Per-parameter squared-gradient averages plus the learning-rate schedule."""

    learning_rate: float = 1e-4
    decay_factor: float = 0.7
    plateau_patience: int = 3
    rho: float = 0.9
    eps: float = 1e-8
    accumulators: Dict[str, np.ndarray] = field(default_factory=dict)
    best_val_loss: float = math.inf
    stagnant_epochs: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0.0 < self.decay_factor < 1.0:
            raise ValueError(f"decay_factor must lie in (0, 1), got {self.decay_factor}")
        if self.plateau_patience < 1:
            raise ValueError("plateau_patience must be a positive number of epochs")


def rmsprop_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: OptimizerState,
) -> None:
    """
    Apply one RMSProp update in place.

    acc <- rho*acc + (1-rho)*g^2 ;  p <- p - lr*g / (sqrt(acc) + eps)
    Parameters without a gradient are left untouched.
    """
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        g = np.asarray(grad, dtype=np.float64)
        acc = state.accumulators.get(name)
        if acc is None:
            acc = np.zeros(param.shape, dtype=np.float64)
        if acc.shape != param.shape:
            raise ValueError(
                f"accumulator for {name} has shape {acc.shape}, expected {param.shape}"
            )
        acc = state.rho * acc + (1.0 - state.rho) * g * g
        state.accumulators[name] = acc
        update = state.learning_rate * g / (np.sqrt(acc) + state.eps)
        param.values = (param.values.astype(np.float64) - update).astype(param.dtype)


def end_epoch(state: OptimizerState, val_loss: float) -> bool:
    """
    Record a validation loss; decay the learning rate after ``plateau_patience``
    consecutive epochs without improvement. Returns True when a decay happened.
    """
    if val_loss < state.best_val_loss:
        state.best_val_loss = val_loss
        state.stagnant_epochs = 0
        return False
    state.stagnant_epochs += 1
    if state.stagnant_epochs < state.plateau_patience:
        return False
    state.learning_rate *= state.decay_factor
    state.stagnant_epochs = 0
    logger.info("Validation loss plateaued; learning rate now %.3g", state.learning_rate)
    return True


class RMSProp:
    """Thin object wrapper binding a parameter set to an ``OptimizerState``."""

    def __init__(self, params: Mapping[str, Tensor], state: Optional[OptimizerState] = None):
        self.params = dict(params)
        self.state = state or OptimizerState()

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.zero_grad()

    def step(self) -> None:
        rmsprop_step(self.params, {n: p.grad for n, p in self.params.items()}, self.state)

    def end_epoch(self, val_loss: float) -> bool:
        return end_epoch(self.state, val_loss)
