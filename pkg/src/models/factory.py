"""Build any of the four referring models from configuration."""

import logging
from typing import Dict, Optional

import numpy as np

from ..config import Config
from ..errors import ConfigError
from ..scenes.models import Vocabulary
from .base import ReferringModel
from .baselines import BaselineParams, CooccurrenceModel, SpatialShiftModel, VrdModel
from .encoder import build_encoder
from .ssas import AttentionParams, SsasModel, SsasParams, validate_shift_geometry

logger = logging.getLogger(__name__)

MODEL_KINDS = ("ssas", "cooccur", "vrd", "spatialshift")


def create_model(
    kind: str,
    vocabulary: Vocabulary,
    config: Config,
    seed: int,
    stat_kernels: Optional[Dict[str, np.ndarray]] = None,
    dtype=np.float32,
) -> ReferringModel:
    """Create a freshly initialised model of ``kind``; all randomness comes from ``seed``."""
    if kind not in MODEL_KINDS:
        raise ConfigError(f"Unknown model kind {kind!r}; expected one of {MODEL_KINDS}")

    rng = np.random.default_rng(seed)
    encoder_config = config.encoder
    model_config = config.model
    training = config.training
    n_categories = len(vocabulary.categories)
    n_predicates = len(vocabulary.predicates)
    encoder = build_encoder(
        encoder_config, n_categories, config.generation.image_size, rng, dtype
    )

    if kind == "ssas":
        validate_shift_geometry(
            model_config.shift_layers, model_config.kernel_size, encoder_config.grid_size
        )
        params = SsasParams.initialize(
            n_categories, n_predicates, encoder.channels, model_config, rng, dtype
        )
        model = SsasModel(encoder, params, training.iterations, training.supervise_all_iterations)
    elif kind == "spatialshift":
        params = AttentionParams.initialize(
            n_categories, encoder.channels, model_config.embedding_scale, rng, dtype
        )
        model = SpatialShiftModel(encoder, params, vocabulary.predicates, stat_kernels)
    else:
        params = BaselineParams.initialize(
            n_categories,
            encoder.channels,
            rng,
            n_predicates=n_predicates if kind == "vrd" else None,
            embedding_scale=model_config.embedding_scale,
            dtype=dtype,
        )
        model = VrdModel(encoder, params) if kind == "vrd" else CooccurrenceModel(encoder, params)

    logger.info(
        "Created %s model (%s encoder, %d parameter tensors)",
        kind,
        encoder.mode,
        len(model.parameters()),
    )
    return model
