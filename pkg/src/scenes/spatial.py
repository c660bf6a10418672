"""Statistical predicate shifts estimated from relative entity positions."""

import logging
from typing import Dict, Sequence

import numpy as np
from scipy.signal import convolve2d

from .geometry import grid_center
from .models import Scene, Vocabulary

logger = logging.getLogger(__name__)


def estimate_spatial_shift_kernels(
    scenes: Sequence[Scene], vocabulary: Vocabulary, grid_size: int
) -> Dict[str, np.ndarray]:
    """
    Per-predicate histogram of (Δrow, Δcol) = object cell − subject cell.

    Each kernel is (2L−1)×(2L−1), centred so Δ=(0,0) sits at index (L−1, L−1),
    and sums to 1. A predicate with no instances gets a uniform kernel.
    """
    size = 2 * grid_size - 1
    counts = {p: np.zeros((size, size), dtype=np.float64) for p in vocabulary.predicates}
    for scene in scenes:
        for rel in scene.relationships:
            s_row, s_col = grid_center(
                scene.entities[rel.subject_idx].bbox, scene.width, scene.height, grid_size
            )
            o_row, o_col = grid_center(
                scene.entities[rel.object_idx].bbox, scene.width, scene.height, grid_size
            )
            hist = counts[vocabulary.predicates[rel.predicate]]
            hist[grid_size - 1 + o_row - s_row, grid_size - 1 + o_col - s_col] += 1.0

    kernels = {}
    for predicate, hist in counts.items():
        total = hist.sum()
        if total == 0:
            logger.warning("No training instances of %r; using a uniform shift", predicate)
            kernels[predicate] = np.full((size, size), 1.0 / (size * size))
        else:
            kernels[predicate] = hist / total
    return kernels


def inverse_kernel(kernel: np.ndarray) -> np.ndarray:
    """The object-to-subject shift: the forward kernel rotated by 180 degrees."""
    return np.rot90(kernel, 2).copy()


def spatial_shift(attention: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """
    Move attention by the kernel's offsets: out(i,j) = Σ map(a,b)·K(L−1+i−a, L−1+j−b).

    Accepts an (L, L) map or a (B, L, L) batch.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim == 2:
        return convolve2d(attention, kernel, mode="same")
    return np.stack([convolve2d(a, kernel, mode="same") for a in attention])


def center_of_mass_offset(response: np.ndarray, origin: tuple) -> tuple:
    """(Δrow, Δcol) of a non-negative map's centre of mass relative to ``origin``."""
    response = np.clip(np.asarray(response, dtype=np.float64), 0.0, None)
    mass = response.sum()
    if mass <= 0:
        return 0.0, 0.0
    rows, cols = np.indices(response.shape)
    return (
        float((rows * response).sum() / mass - origin[0]),
        float((cols * response).sum() / mass - origin[1]),
    )
