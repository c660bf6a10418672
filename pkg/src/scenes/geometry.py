"""Exact pixel-to-grid geometry: cell coverage, ground-truth masks, grid centres."""

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from .models import BBox

# Coverage fractions are exact multiples of small rationals; this absorbs rounding.
_HALF = 0.5 - 1e-9


@dataclass(frozen=True)
class GroundMask:
    """Binary L×L grid of cells occupied by one or more entities."""

    grid: np.ndarray
    entity_indices: Tuple[int, ...]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroundMask):
            return NotImplemented
        return self.entity_indices == other.entity_indices and np.array_equal(
            self.grid, other.grid
        )

    def __hash__(self):
        return hash((self.entity_indices, self.grid.tobytes()))


def interval_weights(extent: int, grid_size: int) -> np.ndarray:
    """
    (grid_size, extent) matrix: entry [i, x] is the length of pixel [x, x+1)
    inside cell i, divided by the cell length extent/grid_size.
    """
    edges = np.arange(grid_size + 1, dtype=np.float64) * extent / grid_size
    pixels = np.arange(extent, dtype=np.float64)
    lo = np.maximum(edges[:-1, None], pixels[None, :])
    hi = np.minimum(edges[1:, None], pixels[None, :] + 1.0)
    return np.clip(hi - lo, 0.0, None) * grid_size / extent


def _interval_coverage(start: float, stop: float, extent: int, grid_size: int) -> np.ndarray:
    edges = np.arange(grid_size + 1, dtype=np.float64) * extent / grid_size
    overlap = np.minimum(edges[1:], stop) - np.maximum(edges[:-1], start)
    return np.clip(overlap, 0.0, None) * grid_size / extent


def box_coverage(bbox: BBox, width: int, height: int, grid_size: int) -> np.ndarray:
    """Fraction of each cell's area lying inside the box (separable, exact)."""
    x0, y0, x1, y1 = bbox
    rows = _interval_coverage(y0, y1, height, grid_size)
    cols = _interval_coverage(x0, x1, width, grid_size)
    return np.outer(rows, cols)


def pixel_coverage(pixel_mask: np.ndarray, grid_size: int) -> np.ndarray:
    """Fraction of each cell covered by a boolean (H, W) or (H, W, K) pixel mask."""
    height, width = pixel_mask.shape[:2]
    rows = interval_weights(height, grid_size)
    cols = interval_weights(width, grid_size)
    mask = pixel_mask.astype(np.float64)
    if mask.ndim == 2:
        return rows @ mask @ cols.T
    return np.einsum("ih,hwk,jw->ijk", rows, mask, cols)


def cell_of(x: float, y: float, width: int, height: int, grid_size: int) -> Tuple[int, int]:
    """Grid cell (row, col) containing pixel coordinate (x, y)."""
    row = min(grid_size - 1, int(np.floor(y * grid_size / height)))
    col = min(grid_size - 1, int(np.floor(x * grid_size / width)))
    return row, col


def grid_center(bbox: BBox, width: int, height: int, grid_size: int) -> Tuple[int, int]:
    x0, y0, x1, y1 = bbox
    return cell_of((x0 + x1) / 2.0, (y0 + y1) / 2.0, width, height, grid_size)


def box_to_mask(
    bbox: BBox, width: int, grid_size: int, height: int | None = None, entity_idx: int = -1
) -> GroundMask:
    """
    Cells with at least half their area inside the box. A box too small to
    half-cover any cell marks the single cell containing its centre.
    """
    height = width if height is None else height
    grid = box_coverage(bbox, width, height, grid_size) >= _HALF
    if not grid.any():
        row, col = grid_center(bbox, width, height, grid_size)
        grid[row, col] = True
    return GroundMask(grid.astype(np.uint8), (entity_idx,))


def union_mask(masks: Iterable[GroundMask]) -> GroundMask:
    masks = list(masks)
    grid = np.zeros_like(masks[0].grid)
    indices = []
    for mask in masks:
        grid = grid | mask.grid
        indices.extend(mask.entity_indices)
    return GroundMask(grid, tuple(sorted(set(indices))))


def overlap_ratio(a: BBox, b: BBox) -> float:
    """Intersection area over the smaller box's area."""
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    smaller = min((a[2] - a[0]) * (a[3] - a[1]), (b[2] - b[0]) * (b[3] - b[1]))
    return (ix * iy) / smaller
