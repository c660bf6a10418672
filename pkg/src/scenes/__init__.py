"""Synthetic scenes: generation, geometry, rasters and persistence."""

from .dataset import (
    load_dataset,
    load_split,
    read_meta,
    save_dataset,
    without_categories,
    write_meta,
)
from .generator import census, derive_relationships, generate_scene, generate_split, scene_seed
from .geometry import GroundMask, box_coverage, box_to_mask, grid_center, pixel_coverage
from .models import Entity, Relationship, Scene, Vocabulary
from .raster import rasterize
from .spatial import estimate_spatial_shift_kernels, inverse_kernel, spatial_shift

__all__ = [
    "Entity",
    "Relationship",
    "Scene",
    "Vocabulary",
    "GroundMask",
    "box_coverage",
    "box_to_mask",
    "grid_center",
    "pixel_coverage",
    "census",
    "derive_relationships",
    "generate_scene",
    "generate_split",
    "scene_seed",
    "rasterize",
    "save_dataset",
    "load_dataset",
    "load_split",
    "read_meta",
    "write_meta",
    "without_categories",
    "estimate_spatial_shift_kernels",
    "inverse_kernel",
    "spatial_shift",
]
