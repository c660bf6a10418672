"""Minimal differentiable-tensor kernel."""

from .gradcheck import grad_check
from .ops import (
    add,
    avg_pool2,
    bce_with_logits,
    broadcast_mul,
    center_crop,
    channel_dot,
    concat,
    conv2d,
    dense,
    relu,
    reshape,
    sigmoid,
    take,
    total,
)
from .optim import OptimizerState, RMSProp, end_epoch, rmsprop_step
from .tensor import Tensor, constant, parameter

__all__ = [
    "Tensor",
    "constant",
    "parameter",
    "add",
    "avg_pool2",
    "bce_with_logits",
    "broadcast_mul",
    "center_crop",
    "channel_dot",
    "concat",
    "conv2d",
    "dense",
    "relu",
    "reshape",
    "sigmoid",
    "take",
    "total",
    "grad_check",
    "OptimizerState",
    "RMSProp",
    "end_epoch",
    "rmsprop_step",
]
