"""Central finite-difference oracle for the hand-written backward passes."""

from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def grad_check(
    op: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-3,
    seed: int = 0,
    sample: Optional[int] = None,
) -> float:
    """
    Compare analytic and central-difference gradients of ``op(*inputs)``.

    A non-scalar output is reduced to ``sum(out * w)`` with a fixed random
    projection ``w``. Only inputs with ``requires_grad`` are checked; ``sample``
    limits the check to that many randomly chosen scalar entries overall.
    Returns the maximum relative error |a-b| / max(1e-8, |a|+|b|).
    """
    rng = np.random.default_rng(seed)
    for tensor in inputs:
        tensor.values = np.ascontiguousarray(tensor.values)
    out = op(*inputs)
    weights = rng.standard_normal(out.shape) if out.ndim else np.ones(())

    for tensor in inputs:
        tensor.zero_grad()
    out.backward(weights)

    def objective() -> float:
        return float(np.sum(op(*inputs).values.astype(np.float64) * weights))

    entries = [
        (i, flat)
        for i, tensor in enumerate(inputs)
        if tensor.requires_grad
        for flat in range(tensor.values.size)
    ]
    if sample is not None and sample < len(entries):
        chosen = rng.choice(len(entries), size=sample, replace=False)
        entries = [entries[c] for c in sorted(chosen)]

    worst = 0.0
    for i, flat in entries:
        tensor = inputs[i]
        view = tensor.values.reshape(-1)
        original = view[flat]
        view[flat] = original + h
        plus = objective()
        view[flat] = original - h
        minus = objective()
        view[flat] = original
        numeric = (plus - minus) / (2.0 * h)
        analytic = 0.0 if tensor.grad is None else float(tensor.grad.reshape(-1)[flat])
        worst = max(worst, float(relative_error(np.array(analytic), np.array(numeric))))
    return worst
