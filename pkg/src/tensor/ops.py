"""
Differentiable operations with hand-derived backward passes.

Every op computes in float64 and stores its result in the common dtype of its
inputs, so float32 parameters keep float32 storage while gradient checks can run
entirely in float64. Spatial ops use the (H, W, C) layout with an optional
leading batch axis.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import DimensionError, ValidationError
from .tensor import Tensor


def _dtype_of(*tensors: Tensor):
    return np.result_type(*(t.values.dtype for t in tensors))


def _f64(tensor: Tensor) -> np.ndarray:
    return tensor.values.astype(np.float64, copy=False)


def _node(values: np.ndarray, dtype, parents: Tuple[Tensor, ...], backward_fn) -> Tensor:
    needs_grad = any(p.requires_grad for p in parents)
    return Tensor(
        values.astype(dtype, copy=False),
        requires_grad=needs_grad,
        parents=parents if needs_grad else (),
        backward_fn=backward_fn if needs_grad else None,
    )


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def conv2d(x: Tensor, kernel: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Same-padded, stride-1 2D convolution (cross-correlation, zero fill).

    ``x`` is (H, W, Cin) or (B, H, W, Cin). ``kernel`` is a shared (k, k, Cin, Cout)
    filter bank or a per-example stack (B, k, k, Cin, Cout).
    """
    if x.ndim not in (3, 4):
        raise DimensionError(f"conv2d input must be (H,W,C) or (B,H,W,C), got shape {x.shape}")
    unbatched = x.ndim == 3
    xv = _f64(x)[None] if unbatched else _f64(x)
    batch, height, width, c_in = xv.shape

    per_example = kernel.ndim == 5
    if kernel.ndim not in (4, 5):
        raise DimensionError(f"conv2d kernel must have 4 or 5 axes, got shape {kernel.shape}")
    kv = _f64(kernel)
    k_shape = kv.shape[1:] if per_example else kv.shape
    k = k_shape[0]
    if k_shape[1] != k:
        raise DimensionError(f"conv2d kernel axes 0 and 1 differ: {k_shape[0]} vs {k_shape[1]}")
    if k % 2 == 0:
        raise DimensionError(f"conv2d kernel size (axis 0) must be odd, got {k}")
    if k_shape[2] != c_in:
        raise DimensionError(
            f"conv2d channel mismatch: input axis -1 has {c_in}, kernel axis 2 has {k_shape[2]}"
        )
    if per_example and kv.shape[0] != batch:
        raise DimensionError(
            f"conv2d batch mismatch: input axis 0 has {batch}, kernel axis 0 has {kv.shape[0]}"
        )
    c_out = k_shape[3]
    if bias is not None and bias.shape != (c_out,):
        raise DimensionError(f"conv2d bias axis 0 must be {c_out}, got shape {bias.shape}")

    pad = k // 2
    padded = np.pad(xv, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))  # (B, H, W, Cin, k, k)
    patches = windows.transpose(0, 1, 2, 4, 5, 3).reshape(batch, height * width, k * k * c_in)
    if per_example:
        kmat = kv.reshape(batch, k * k * c_in, c_out)
        out = np.matmul(patches, kmat)
    else:
        kmat = kv.reshape(k * k * c_in, c_out)
        out = patches @ kmat
    out = out.reshape(batch, height, width, c_out)
    if bias is not None:
        out = out + _f64(bias)

    def backward(grad: np.ndarray):
        g = grad[None] if unbatched else grad
        g2 = g.reshape(batch, height * width, c_out)
        if per_example:
            g_kernel = np.matmul(patches.transpose(0, 2, 1), g2).reshape(kv.shape)
            g_patches = np.matmul(g2, kmat.transpose(0, 2, 1))
        else:
            g_kernel = (
                patches.reshape(-1, k * k * c_in).T @ g2.reshape(-1, c_out)
            ).reshape(kv.shape)
            g_patches = g2 @ kmat.T
        g_patches = g_patches.reshape(batch, height, width, k, k, c_in)
        g_padded = np.zeros_like(padded)
        for dh in range(k):
            for dw in range(k):
                g_padded[:, dh : dh + height, dw : dw + width, :] += g_patches[:, :, :, dh, dw, :]
        g_x = g_padded[:, pad : pad + height, pad : pad + width, :]
        if unbatched:
            g_x = g_x[0]
        grads = [g_x, g_kernel]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1, 2)))
        return grads

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    values = out[0] if unbatched else out
    return _node(values, _dtype_of(*parents), parents, backward)


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weights + bias`` for (Din,) or (B, Din) inputs."""
    if weights.ndim != 2:
        raise DimensionError(f"dense weights must be (Din, Dout), got shape {weights.shape}")
    d_in, d_out = weights.shape
    if x.shape[-1] != d_in:
        raise DimensionError(
            f"dense input axis -1 has {x.shape[-1]}, weights axis 0 has {d_in}"
        )
    if bias.shape != (d_out,):
        raise DimensionError(f"dense bias axis 0 must be {d_out}, got shape {bias.shape}")
    xv, wv = _f64(x), _f64(weights)
    out = xv @ wv + _f64(bias)

    def backward(grad: np.ndarray):
        x2 = xv.reshape(-1, d_in)
        g2 = grad.reshape(-1, d_out)
        return grad @ wv.T, x2.T @ g2, g2.sum(axis=0)

    return _node(out, _dtype_of(x, weights, bias), (x, weights, bias), backward)


def relu(x: Tensor) -> Tensor:
    xv = _f64(x)
    active = xv > 0

    def backward(grad: np.ndarray):
        return (grad * active,)

    return _node(np.where(active, xv, 0.0), x.dtype, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = expit(_f64(x))

    def backward(grad: np.ndarray):
        return (grad * s * (1.0 - s),)

    return _node(s, x.dtype, (x,), backward)


def broadcast_mul(attention: Tensor, features: Tensor) -> Tensor:
    """Multiply a single-channel map (..., L, L, 1) across every feature channel."""
    if attention.shape[-1] != 1:
        raise DimensionError(f"broadcast_mul map axis -1 must be 1, got {attention.shape[-1]}")
    if attention.shape[:-1] != features.shape[:-1]:
        raise DimensionError(
            f"broadcast_mul spatial axes differ: map {attention.shape[:-1]} "
            f"vs features {features.shape[:-1]}"
        )
    av, fv = _f64(attention), _f64(features)

    def backward(grad: np.ndarray):
        return (grad * fv).sum(axis=-1, keepdims=True), grad * av

    return _node(av * fv, _dtype_of(attention, features), (attention, features), backward)


def channel_dot(features: Tensor, vectors: Tensor) -> Tensor:
    """
    Per-cell dot product with a C-vector: (L, L, C)·(C,) -> (L, L), or
    (B, L, L, C)·(B, C) -> (B, L, L) with one vector per example.
    """
    fv, vv = _f64(features), _f64(vectors)
    channels = features.shape[-1]
    if vectors.shape[-1] != channels:
        raise DimensionError(
            f"embedding axis -1 has {vectors.shape[-1]}, features axis -1 has {channels}"
        )
    if vectors.ndim == 1:
        broadcast = vv
    elif vectors.ndim == 2 and features.ndim == 4 and vectors.shape[0] == features.shape[0]:
        broadcast = vv[:, None, None, :]
    else:
        raise DimensionError(
            f"channel_dot cannot pair features {features.shape} with vectors {vectors.shape}"
        )
    out = (fv * broadcast).sum(axis=-1)

    def backward(grad: np.ndarray):
        g_features = grad[..., None] * broadcast
        weighted = fv * grad[..., None]
        if vectors.ndim == 1:
            g_vectors = weighted.reshape(-1, channels).sum(axis=0)
        else:
            g_vectors = weighted.sum(axis=(1, 2))
        return g_features, g_vectors

    return _node(out, _dtype_of(features, vectors), (features, vectors), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum with numpy broadcasting."""
    av, bv = _f64(a), _f64(b)
    try:
        out = av + bv
    except ValueError as e:
        raise DimensionError(f"add cannot broadcast {a.shape} with {b.shape}") from e

    def backward(grad: np.ndarray):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)

    return _node(out, _dtype_of(a, b), (a, b), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = _f64(x).reshape(shape)

    def backward(grad: np.ndarray):
        return (grad.reshape(x.shape),)

    return _node(out, x.dtype, (x,), backward)


def take(table: Tensor, indices) -> Tensor:
    """Gather rows ``table[indices]``; gradients scatter-add back into the table."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise DimensionError(
            f"take index out of range for table axis 0 of size {table.shape[0]}"
        )
    out = _f64(table)[idx]

    def backward(grad: np.ndarray):
        g_table = np.zeros(table.shape, dtype=np.float64)
        np.add.at(g_table, idx, grad)
        return (g_table,)

    return _node(out, table.dtype, (table,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_f64(t) for t in tensors]
    try:
        out = np.concatenate(parts, axis=axis)
    except ValueError as e:
        shapes = [t.shape for t in tensors]
        raise DimensionError(f"concat along axis {axis} cannot join shapes {shapes}") from e
    splits = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def backward(grad: np.ndarray):
        return np.split(grad, splits, axis=axis)

    return _node(out, _dtype_of(*tensors), tuple(tensors), backward)


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 average pooling with stride 2 over the spatial axes."""
    unbatched = x.ndim == 3
    xv = _f64(x)[None] if unbatched else _f64(x)
    batch, height, width, channels = xv.shape
    if height % 2 or width % 2:
        raise DimensionError(f"avg_pool2 needs even spatial axes, got {height}x{width}")
    out = xv.reshape(batch, height // 2, 2, width // 2, 2, channels).mean(axis=(2, 4))

    def backward(grad: np.ndarray):
        g = grad[None] if unbatched else grad
        g_x = np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) / 4.0
        return (g_x[0] if unbatched else g_x,)

    return _node(out[0] if unbatched else out, x.dtype, (x,), backward)


def center_crop(x: Tensor, size: int) -> Tensor:
    """Crop the spatial axes to ``size`` x ``size`` around the centre."""
    unbatched = x.ndim == 3
    xv = _f64(x)[None] if unbatched else _f64(x)
    height, width = xv.shape[1:3]
    if size > height or size > width:
        raise DimensionError(f"center_crop size {size} exceeds spatial axes {height}x{width}")
    top, left = (height - size) // 2, (width - size) // 2
    out = xv[:, top : top + size, left : left + size, :]

    def backward(grad: np.ndarray):
        g = grad[None] if unbatched else grad
        g_x = np.zeros_like(xv)
        g_x[:, top : top + size, left : left + size, :] = g
        return (g_x[0] if unbatched else g_x,)

    return _node(out[0] if unbatched else out, x.dtype, (x,), backward)


def bce_with_logits(logits: Tensor, target) -> Tensor:
    """
    Mean binary cross-entropy between logits and a binary target grid.

    Uses max(z, 0) - z*t + log(1 + exp(-|z|)), which never overflows.
    """
    t = np.asarray(target.values if isinstance(target, Tensor) else target, dtype=np.float64)
    if t.shape != logits.shape:
        raise DimensionError(f"bce target shape {t.shape} differs from logits {logits.shape}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValidationError("bce target values must be 0 or 1")
    z = _f64(logits)
    losses = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    count = z.size

    def backward(grad: np.ndarray):
        return ((expit(z) - t) * (grad / count),)

    return _node(np.asarray(losses.sum() / count), logits.dtype, (logits,), backward)


def total(losses: List[Tensor]) -> Tensor:
    """Sum a list of scalar losses."""
    result = losses[0]
    for loss in losses[1:]:
        result = add(result, loss)
    return result
