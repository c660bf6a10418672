"""Heatmap export for attention traces, learned shifts and saccade walks."""

import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError
from .models.base import ModelOutput, ReferringModel
from .models.baselines import SpatialShiftModel
from .models.ssas import SsasModel, shift
from .scenes.raster import to_gray, write_pgm
from .scenes.spatial import center_of_mass_offset, inverse_kernel, spatial_shift
from .tensor import Tensor

logger = logging.getLogger(__name__)


def map_stats(values: np.ndarray) -> Dict:
    """Raw statistics recorded next to every normalised heatmap."""
    values = np.asarray(values, dtype=np.float64)
    row, col = np.unravel_index(int(np.argmax(values)), values.shape)
    return {
        "min": float(values.min()),
        "max": float(values.max()),
        "mean": float(values.mean()),
        "sum": float(values.sum()),
        "argmax": [int(row), int(col)],
    }


def write_heatmap(path: str | Path, values: np.ndarray) -> Dict:
    """Write a min-max normalised PGM and return the map's raw statistics."""
    write_pgm(path, to_gray(values))
    return map_stats(values)


def write_json(path: str | Path, data: Dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")


def export_trace(output: ModelOutput, out_dir: str | Path, index: int = 0) -> Dict:
    """One subject and one object heatmap per iteration, plus ``maps.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = {}
    for t, (subject, obj) in enumerate(output.trace):
        for role, attention in (("subject", subject), ("object", obj)):
            name = f"iter{t}_{role}"
            logits = attention.logits.values
            values = logits[index] if logits.ndim == 3 else logits
            stats[name] = write_heatmap(out_dir / f"{name}.pgm", values)
    write_json(out_dir / "maps.json", stats)
    logger.info("Wrote %d heatmaps to %s", 2 * len(output.trace), out_dir)
    return stats


def shift_responses(
    model: ReferringModel, predicate: int, grid_size: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Forward and inverse response to unit attention at the grid centre."""
    delta = np.zeros((grid_size, grid_size))
    delta[grid_size // 2, grid_size // 2] = 1.0
    if isinstance(model, SsasModel):
        kernels = model.params.predicate_kernels(np.int64(predicate))
        source = Tensor(delta, dtype=model.params.embeddings.dtype)
        forward = shift(source, kernels.forward).activated.values
        inverse = shift(source, kernels.inverse).activated.values
        return forward.astype(np.float64), inverse.astype(np.float64)
    if isinstance(model, SpatialShiftModel) and model.stat_kernels is not None:
        kernel = model.stat_kernels[predicate]
        return spatial_shift(delta, kernel), spatial_shift(delta, inverse_kernel(kernel))
    raise ConfigError(f"{model.kind} models have no predicate shift to render")


def render_shift_kernel(
    model: ReferringModel, predicate: int, predicate_name: str, grid_size: int, out_dir: str | Path
) -> Dict:
    """Write both shift responses as PGMs and their centre-of-mass displacement."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    origin = (grid_size // 2, grid_size // 2)
    forward, inverse = shift_responses(model, predicate, grid_size)
    sidecar = {"predicate": predicate_name, "origin": list(origin)}
    for direction, response in (("forward", forward), ("inverse", inverse)):
        stats = write_heatmap(out_dir / f"{predicate_name}_{direction}.pgm", response)
        stats["displacement"] = list(center_of_mass_offset(response, origin))
        sidecar[direction] = stats
    write_json(out_dir / f"{predicate_name}_shift.json", sidecar)
    return sidecar


def export_saccade(maps: Dict, node_names: List[str], out_dir: str | Path) -> Dict:
    """Per-node heatmaps (``node{i}.pgm``) plus ``saccade.json`` with argmax cells."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"order": list(maps), "nodes": {}}
    for node, attention in maps.items():
        stats = write_heatmap(out_dir / f"node{node}.pgm", attention.logits.values)
        stats["category"] = node_names[node]
        summary["nodes"][str(node)] = stats
    write_json(out_dir / "saccade.json", summary)
    return summary
