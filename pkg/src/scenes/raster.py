"""Scene rasterisation and the netpbm (PPM/PGM) image files used on disk."""

from pathlib import Path

import numpy as np

from ..errors import DatasetError
from ..tensor import Tensor
from .models import Entity, Scene, Vocabulary

BACKGROUND = (128, 128, 128)

COLORS = {
    "red": (220, 40, 40),
    "green": (40, 180, 70),
    "blue": (50, 90, 220),
    "yellow": (230, 210, 50),
    "purple": (150, 60, 190),
    "cyan": (40, 200, 210),
}


def shape_mask(entity: Entity, shape: str, width: int, height: int) -> np.ndarray:
    """Boolean (H, W) mask of the pixels painted for one entity."""
    x0, y0, x1, y1 = entity.bbox
    ys, xs = np.mgrid[0:height, 0:width]
    px, py = xs + 0.5, ys + 0.5
    inside = (px >= x0) & (px < x1) & (py >= y0) & (py < y1)
    if shape == "circle":
        cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
        rx, ry = (x1 - x0) / 2.0, (y1 - y0) / 2.0
        return inside & (((px - cx) / rx) ** 2 + ((py - cy) / ry) ** 2 <= 1.0)
    if shape == "triangle":
        cx = (x0 + x1) / 2.0
        depth = (py - y0) / (y1 - y0)
        return inside & (np.abs(px - cx) <= depth * (x1 - x0) / 2.0)
    return inside


def rasterize_pixels(scene: Scene, vocabulary: Vocabulary) -> np.ndarray:
    """Opaque category-coloured shapes on mid-gray, as a (H, W, 3) uint8 array."""
    image = np.empty((scene.height, scene.width, 3), dtype=np.uint8)
    image[:] = BACKGROUND
    for entity in scene.entities:
        color, shape = vocabulary.categories[entity.category].split(" ", 1)
        mask = shape_mask(entity, shape, scene.width, scene.height)
        image[mask] = COLORS.get(color, (255, 255, 255))
    return image


def rasterize(scene: Scene, vocabulary: Vocabulary) -> Tensor:
    """The scene image as a (H, W, 3) tensor with values in [0, 1]."""
    return Tensor(rasterize_pixels(scene, vocabulary).astype(np.float32) / 255.0)


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Binary P6 colour image, 8 bits per channel."""
    height, width = image.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    """Binary P5 grayscale image, 8 bits."""
    height, width = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_netpbm(path: str | Path) -> np.ndarray:
    """Read a P5 or P6 file written by ``write_pgm``/``write_ppm``."""
    data = Path(path).read_bytes()
    fields = []
    offset = 0
    while len(fields) < 4:
        end = data.index(b"\n", offset)
        fields.extend(data[offset:end].split())
        offset = end + 1
    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise DatasetError(f"{path}: unsupported netpbm header {magic!r} maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    pixels = np.frombuffer(data, dtype=np.uint8, offset=offset)
    if pixels.size != width * height * channels:
        raise DatasetError(f"{path}: expected {width * height * channels} bytes, got {pixels.size}")
    shape = (height, width, 3) if channels == 3 else (height, width)
    return pixels.reshape(shape)


def to_gray(values: np.ndarray) -> np.ndarray:
    """Min-max normalise a real map to uint8; a constant map becomes all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.round((values - lo) / (hi - lo) * 255.0).astype(np.uint8)
