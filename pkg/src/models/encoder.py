"""
Feature-map producers: the deterministic oracle and a small trainable CNN.

The oracle gives per-cell category coverage, which removes backbone quality as
a confound; the CNN is trained jointly with the model it feeds.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..config_models import EncoderConfig
from ..errors import ConfigError
from ..scenes.geometry import pixel_coverage
from ..scenes.models import Scene, Vocabulary
from ..tensor import Tensor, avg_pool2, center_crop, conv2d, parameter, relu


@dataclass
class FeatureMap:
    """μ: an L×L×C grid of image features."""

    grid: Tensor
    L: int
    C: int


def oracle_encode(scene: Scene, vocabulary: Vocabulary, grid_size: int) -> FeatureMap:
    """
    Channel c at cell (i, j) is the fraction of the cell covered by boxes of
    category c; the last channel is the uncovered (background) fraction.
    """
    n_categories = len(vocabulary.categories)
    if scene.width < grid_size or scene.height < grid_size:
        raise ConfigError(
            f"{scene.width}x{scene.height} image is smaller than the {grid_size} grid"
        )
    pixels = np.zeros((scene.height, scene.width, n_categories + 1), dtype=bool)
    for entity in scene.entities:
        x0, y0, x1, y1 = entity.bbox
        pixels[y0:y1, x0:x1, entity.category] = True
    pixels[..., n_categories] = ~pixels[..., :n_categories].any(axis=-1)
    grid = pixel_coverage(pixels, grid_size).astype(np.float32)
    return FeatureMap(Tensor(grid), grid_size, n_categories + 1)


class OracleEncoder:
    """Passes through oracle feature maps precomputed per scene."""

    mode = "oracle"

    def __init__(self, grid_size: int, channels: int):
        self.grid_size = grid_size
        self.channels = channels

    def parameters(self) -> Dict[str, Tensor]:
        return {}

    def encode_batch(self, batch) -> Tensor:
        if batch.features is None:
            raise ConfigError("Oracle encoder needs precomputed features in the batch")
        return batch.features


class CnnEncoder:
    """
    Three 3×3 conv+ReLU layers (widths w1 → w2 → C); 2× average pooling after
    the first two, then a centre crop to L×L.
    """

    mode = "trainable"

    def __init__(
        self,
        config: EncoderConfig,
        image_size: int,
        channels: int,
        rng: Optional[np.random.Generator] = None,
        dtype=np.float32,
    ):
        if image_size % 4:
            raise ConfigError(f"image size {image_size} is not divisible by the 4x pooling chain")
        if image_size // 4 < config.grid_size:
            raise ConfigError(
                f"image size {image_size} pools to {image_size // 4}, "
                f"below grid size {config.grid_size}"
            )
        self.grid_size = config.grid_size
        self.channels = channels
        rng = rng or np.random.default_rng(0)
        widths = [3, *config.conv_widths, channels]
        self.params: Dict[str, Tensor] = {}
        for layer in range(3):
            c_in, c_out = widths[layer], widths[layer + 1]
            bound = np.sqrt(6.0 / (9 * c_in))
            self.params[f"conv{layer + 1}"] = parameter(
                rng.uniform(-bound, bound, size=(3, 3, c_in, c_out)), f"conv{layer + 1}", dtype
            )
            self.params[f"bias{layer + 1}"] = parameter(np.zeros(c_out), f"bias{layer + 1}", dtype)

    def parameters(self) -> Dict[str, Tensor]:
        return self.params

    def encode(self, images: Tensor) -> Tensor:
        return cnn_encode(images, self.params, self.grid_size)

    def encode_batch(self, batch) -> Tensor:
        if batch.images is None:
            raise ConfigError("Trainable encoder needs images in the batch")
        return self.encode(batch.images)


def cnn_encode(image: Tensor, params: Dict[str, Tensor], grid_size: int) -> Tensor:
    """μ = CNN(I) for a (H, W, 3) image or a (B, H, W, 3) batch."""
    x = relu(conv2d(image, params["conv1"], params["bias1"]))
    x = avg_pool2(x)
    x = relu(conv2d(x, params["conv2"], params["bias2"]))
    x = avg_pool2(x)
    x = relu(conv2d(x, params["conv3"], params["bias3"]))
    return center_crop(x, grid_size)


def build_encoder(
    config: EncoderConfig, n_categories: int, image_size: int, rng=None, dtype=np.float32
):
    channels = config.resolved_channels(n_categories)
    if config.mode == "oracle":
        return OracleEncoder(config.grid_size, channels)
    return CnnEncoder(config, image_size, channels, rng, dtype)
