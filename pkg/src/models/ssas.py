"""
SSAS: attention over a feature grid, per-predicate shift stacks and the
iterative rollout that refines subject and object attention through each other.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Union

import numpy as np

from ..config_models import ModelConfig
from ..errors import ConfigError, DimensionError
from ..tensor import Tensor, broadcast_mul, conv2d, parameter, relu, reshape, take
from .base import (
    AttentionMap,
    ModelOutput,
    QueryBatch,
    ReferringModel,
    attend,
    embedding_init,
    lookup,
    uniform_init,
)
from .query import Query

logger = logging.getLogger(__name__)


def validate_shift_geometry(n_layers: int, kernel_size: int, grid_size: int) -> None:
    """Reject stacks whose reach cannot span the grid (n·k must exceed L) or even-sized kernels."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ConfigError(f"kernel_size must be a positive odd number, got {kernel_size}")
    if n_layers < 1:
        raise ConfigError(f"shift_layers must be at least 1, got {n_layers}")
    if n_layers * kernel_size <= grid_size:
        raise ConfigError(
            f"{n_layers} shift layers of size {kernel_size} cannot reach across a "
            f"{grid_size}x{grid_size} grid (need shift_layers > grid_size / kernel_size)"
        )


def layer_channels(n_layers: int, hidden: int) -> List[int]:
    """Channel widths c_0..c_n with c_0 = c_n = 1."""
    return [1] + [hidden] * (n_layers - 1) + [1]


@dataclass
class PredicateKernels:
    """Forward and inverse conv stacks for one predicate (or one per batch example)."""

    forward: List[Tensor]
    inverse: List[Tensor]


@dataclass
class AttentionParams:
    """Entity embeddings alone, for models that attend without learned shifts."""

    embeddings: Tensor

    @classmethod
    def initialize(
        cls,
        n_categories: int,
        channels: int,
        embedding_scale: float,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> "AttentionParams":
        embeddings = embedding_init(rng, (n_categories + 1, channels), embedding_scale)
        return cls(embeddings=parameter(embeddings, "embeddings", dtype))

    @property
    def unknown_id(self) -> int:
        return self.embeddings.shape[0] - 1

    def named(self) -> Dict[str, Tensor]:
        return {"embeddings": self.embeddings}


@dataclass
class SsasParams:
    """Learned entity embeddings and per-predicate kernel tables."""

    embeddings: Tensor
    forward: List[Tensor]
    inverse: List[Tensor]

    @classmethod
    def initialize(
        cls,
        n_categories: int,
        n_predicates: int,
        channels: int,
        config: ModelConfig,
        rng: np.random.Generator,
        dtype=np.float32,
    ) -> "SsasParams":
        k = config.kernel_size
        widths = layer_channels(config.shift_layers, config.shift_channels)
        embeddings = embedding_init(rng, (n_categories + 1, channels), config.embedding_scale)

        def table(c_in: int, c_out: int) -> np.ndarray:
            shape = (n_predicates, k, k, c_in, c_out)
            fan_in = k * k * c_in
            if config.kernel_init == "uniform":
                return uniform_init(rng, shape, fan_in, np.float64)
            values = uniform_init(rng, shape, fan_in, np.float64) * config.init_noise
            values[:, k // 2, k // 2, :, :] += 1.0 / c_in
            return values

        forward, inverse = [], []
        for layer in range(config.shift_layers):
            c_in, c_out = widths[layer], widths[layer + 1]
            forward.append(parameter(table(c_in, c_out), f"forward/{layer}", dtype))
            inverse.append(parameter(table(c_in, c_out), f"inverse/{layer}", dtype))
        return cls(
            embeddings=parameter(embeddings, "embeddings", dtype),
            forward=forward,
            inverse=inverse,
        )

    @property
    def unknown_id(self) -> int:
        return self.embeddings.shape[0] - 1

    @property
    def n_predicates(self) -> int:
        return self.forward[0].shape[0]

    def named(self) -> Dict[str, Tensor]:
        params = {"embeddings": self.embeddings}
        for layer, (fwd, inv) in enumerate(zip(self.forward, self.inverse)):
            params[f"forward/{layer}"] = fwd
            params[f"inverse/{layer}"] = inv
        return params

    def predicate_kernels(self, predicate) -> PredicateKernels:
        """Kernels for a predicate id (shared stack) or an id array (per-example stacks)."""
        return PredicateKernels(
            forward=[take(t, predicate) for t in self.forward],
            inverse=[take(t, predicate) for t in self.inverse],
        )


def shift(activated: Tensor, kernels: List[Tensor]) -> AttentionMap:
    """
    Apply n conv+ReLU stages to an (L, L) map or a (B, L, L) batch.

    The last stage's pre-ReLU output is the shifted logits.
    """
    if kernels[0].shape[-2] != 1 or kernels[-1].shape[-1] != 1:
        raise DimensionError("shift stack must start and end with a single channel")
    x = reshape(activated, activated.shape + (1,))
    z = x
    for kernel in kernels:
        z = conv2d(x, kernel)
        x = relu(z)
    logits = reshape(z, activated.shape)
    return AttentionMap(activated=reshape(x, activated.shape), logits=logits)


def modulated_attend(shifted: Tensor, mu: Tensor, embedding: Tensor) -> AttentionMap:
    """Re-attend after multiplying a shifted map across every feature channel."""
    modulated = broadcast_mul(reshape(shifted, shifted.shape + (1,)), mu)
    return attend(modulated, embedding)


def _query_ids(query: Union[Query, QueryBatch]):
    if isinstance(query, Query):
        return np.int64(query.subject), np.int64(query.predicate), np.int64(query.object)
    return query.subjects, query.predicates, query.objects


def infer_rollout(
    mu: Tensor, query: Union[Query, QueryBatch], params: SsasParams, iterations: int
) -> ModelOutput:
    """
    Iteration 0 attends with the subject and object embeddings; every later
    iteration shifts each map toward the other role and re-attends on the
    modulated features. Returns the final maps and the trace of all iterations.
    """
    if iterations < 0:
        raise ConfigError(f"iterations must be >= 0, got {iterations}")
    subjects, predicates, objects = _query_ids(query)
    s_emb = lookup(params.embeddings, subjects, params.unknown_id)
    o_emb = lookup(params.embeddings, objects, params.unknown_id)
    subject = attend(mu, s_emb)
    obj = attend(mu, o_emb)
    trace = [(subject, obj)]
    if iterations:
        kernels = params.predicate_kernels(predicates)
        for _ in range(iterations):
            object_shift = shift(subject.activated, kernels.forward)
            subject_shift = shift(obj.activated, kernels.inverse)
            subject = modulated_attend(subject_shift.activated, mu, s_emb)
            obj = modulated_attend(object_shift.activated, mu, o_emb)
            trace.append((subject, obj))
    return ModelOutput(subject=subject, object=obj, trace=trace)


class SsasModel(ReferringModel):
    """Symmetric stacked attention shifts over an oracle or trainable encoder."""

    kind = "ssas"

    def __init__(
        self,
        encoder,
        params: SsasParams,
        iterations: int = 2,
        supervise_all_iterations: bool = False,
    ):
        super().__init__(encoder, iterations, supervise_all_iterations)
        if params.embeddings.shape[1] != encoder.channels:
            raise ConfigError(
                f"embedding width {params.embeddings.shape[1]} differs from encoder channels "
                f"{encoder.channels}"
            )
        self.params = params
        logger.debug(
            "SSAS model: %d layers, t=%d, %d predicates", len(params.forward), iterations,
            params.n_predicates,
        )

    def own_parameters(self) -> Dict[str, Tensor]:
        return self.params.named()

    def forward(self, batch: QueryBatch, training: bool = False) -> ModelOutput:
        return infer_rollout(self.features(batch), batch, self.params, self.iterations)
