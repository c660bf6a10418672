"""
Comparison models that share attention, loss and training with SSAS and
differ only in how a query becomes the vectors they attend with.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import CheckpointError, ConfigError
from ..scenes.spatial import inverse_kernel, spatial_shift
from ..tensor import Tensor, concat, constant, dense, parameter, relu, take
from .base import ModelOutput, QueryBatch, ReferringModel, attend, lookup, uniform_init
from .query import Query
from .ssas import AttentionParams, _query_ids, modulated_attend


@dataclass
class BaselineParams:
    """Embeddings, a dense fusion layer and one dense head per role."""

    entity_embeddings: Tensor
    fusion_weights: Tensor
    fusion_bias: Tensor
    subject_weights: Tensor
    subject_bias: Tensor
    object_weights: Tensor
    object_bias: Tensor
    predicate_embeddings: Optional[Tensor] = None

    @classmethod
    def initialize(
        cls,
        n_categories: int,
        channels: int,
        rng: np.random.Generator,
        n_predicates: Optional[int] = None,
        embedding_scale: float = 0.1,
        dtype=np.float32,
    ) -> "BaselineParams":
        parts = 2 if n_predicates is None else 3
        c = channels

        def weights(name: str, fan_in: int):
            return parameter(uniform_init(rng, (fan_in, c), fan_in, np.float64), name, dtype)

        entities = rng.normal(0.0, embedding_scale, size=(n_categories + 1, c))
        predicates = None
        if n_predicates is not None:
            predicates = parameter(
                rng.normal(0.0, embedding_scale, size=(n_predicates, c)),
                "predicate_embeddings",
                dtype,
            )
        return cls(
            entity_embeddings=parameter(entities, "entity_embeddings", dtype),
            fusion_weights=weights("fusion_weights", parts * c),
            fusion_bias=parameter(np.zeros(c), "fusion_bias", dtype),
            subject_weights=weights("subject_weights", c),
            subject_bias=parameter(np.zeros(c), "subject_bias", dtype),
            object_weights=weights("object_weights", c),
            object_bias=parameter(np.zeros(c), "object_bias", dtype),
            predicate_embeddings=predicates,
        )

    @property
    def unknown_id(self) -> int:
        return self.entity_embeddings.shape[0] - 1

    def named(self) -> Dict[str, Tensor]:
        names = [
            "entity_embeddings",
            "fusion_weights",
            "fusion_bias",
            "subject_weights",
            "subject_bias",
            "object_weights",
            "object_bias",
            "predicate_embeddings",
        ]
        return {name: getattr(self, name) for name in names if getattr(self, name) is not None}


def _fuse(parts: List[Tensor], params: BaselineParams):
    # Linear role heads: the vectors are signed.
    hidden = relu(dense(concat(parts, axis=-1), params.fusion_weights, params.fusion_bias))
    subject_vec = dense(hidden, params.subject_weights, params.subject_bias)
    object_vec = dense(hidden, params.object_weights, params.object_bias)
    return subject_vec, object_vec


def cooccurrence_infer(mu: Tensor, query: Union[Query, QueryBatch], params: BaselineParams):
    """Fuse subject and object embeddings only; the predicate is never read."""
    subjects, _, objects = _query_ids(query)
    s_emb = lookup(params.entity_embeddings, subjects, params.unknown_id)
    o_emb = lookup(params.entity_embeddings, objects, params.unknown_id)
    subject_vec, object_vec = _fuse([s_emb, o_emb], params)
    return (
        attend(mu, subject_vec),
        attend(mu, object_vec),
    )


def vrd_infer(mu: Tensor, query: Union[Query, QueryBatch], params: BaselineParams):
    """Fuse subject, predicate and object embeddings into one vector per role."""
    if params.predicate_embeddings is None:
        raise ConfigError("VRD fusion needs predicate embeddings")
    subjects, predicates, objects = _query_ids(query)
    s_emb = lookup(params.entity_embeddings, subjects, params.unknown_id)
    o_emb = lookup(params.entity_embeddings, objects, params.unknown_id)
    p_emb = take(params.predicate_embeddings, predicates)
    subject_vec, object_vec = _fuse([s_emb, p_emb, o_emb], params)
    return (
        attend(mu, subject_vec),
        attend(mu, object_vec),
    )


def _shift_each(maps: np.ndarray, kernels: Sequence[np.ndarray]) -> np.ndarray:
    if maps.ndim == 2:
        return spatial_shift(maps, kernels[0])
    return np.stack([spatial_shift(m, k) for m, k in zip(maps, kernels)])


def spatial_shift_infer(
    mu: Tensor,
    query: Union[Query, QueryBatch],
    attention_params: AttentionParams,
    stat_kernels: np.ndarray,
):
    """
    Attend, move each map by the fixed statistical kernel of the predicate
    (subject → object forward, object → subject rotated), then re-attend once.

    ``stat_kernels`` is (P, 2L−1, 2L−1), indexed by predicate id.
    """
    subjects, predicates, objects = _query_ids(query)
    s_emb = lookup(attention_params.embeddings, subjects, attention_params.unknown_id)
    o_emb = lookup(attention_params.embeddings, objects, attention_params.unknown_id)
    subject0 = attend(mu, s_emb)
    object0 = attend(mu, o_emb)

    forward = [stat_kernels[p] for p in np.atleast_1d(predicates)]
    inverse = [inverse_kernel(k) for k in forward]
    object_shift = _shift_each(subject0.activated.values, forward)
    subject_shift = _shift_each(object0.activated.values, inverse)
    dtype = mu.dtype
    subject = modulated_attend(constant(subject_shift, dtype), mu, s_emb)
    obj = modulated_attend(constant(object_shift, dtype), mu, o_emb)
    return (subject0, object0), (subject, obj)


class CooccurrenceModel(ReferringModel):
    """Predicate-blind fusion of the two entity embeddings."""

    kind = "cooccur"

    def __init__(self, encoder, params: BaselineParams):
        super().__init__(encoder)
        self.params = params

    def own_parameters(self) -> Dict[str, Tensor]:
        return self.params.named()

    def forward(self, batch: QueryBatch, training: bool = False) -> ModelOutput:
        subject, obj = cooccurrence_infer(self.features(batch), batch, self.params)
        return ModelOutput(subject, obj, [(subject, obj)])


class VrdModel(CooccurrenceModel):
    """Joint embedding of all three query components."""

    kind = "vrd"

    def forward(self, batch: QueryBatch, training: bool = False) -> ModelOutput:
        subject, obj = vrd_infer(self.features(batch), batch, self.params)
        return ModelOutput(subject, obj, [(subject, obj)])


class SpatialShiftModel(ReferringModel):
    """
    Attention modules trained without iterations; at inference the maps are
    moved by fixed per-predicate shifts estimated from training scenes.
    """

    kind = "spatialshift"

    def __init__(
        self,
        encoder,
        params: AttentionParams,
        predicates: Sequence[str],
        stat_kernels=None,
    ):
        super().__init__(encoder, iterations=0)
        self.params = params
        self.predicates = list(predicates)
        self.stat_kernels: Optional[np.ndarray] = None
        if stat_kernels is not None:
            self.set_kernels(stat_kernels)

    def set_kernels(self, kernels: Dict[str, np.ndarray]) -> None:
        missing = [p for p in self.predicates if p not in kernels]
        if missing:
            raise ConfigError(f"No statistical shift for predicates {missing}")
        self.stat_kernels = np.stack(
            [np.asarray(kernels[p], dtype=np.float64) for p in self.predicates]
        )

    def own_parameters(self) -> Dict[str, Tensor]:
        return self.params.named()

    def extra_arrays(self) -> Dict[str, np.ndarray]:
        if self.stat_kernels is None:
            return {}
        return {f"stat_kernel/{p}": k for p, k in zip(self.predicates, self.stat_kernels)}

    def load_extra_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        kernels = {
            name.split("/", 1)[1]: v
            for name, v in arrays.items()
            if name.startswith("stat_kernel/")
        }
        if kernels:
            self.set_kernels(kernels)

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        # Kernels arrive with the checkpoint, so the expected set includes them.
        if self.stat_kernels is None:
            names = [n for n in arrays if n.startswith("stat_kernel/")]
            if not names:
                raise CheckpointError("spatialshift checkpoint carries no statistical kernels")
            self.load_extra_arrays({n: arrays[n] for n in names})
        super().load_state_arrays(arrays)

    def forward(self, batch: QueryBatch, training: bool = False) -> ModelOutput:
        mu = self.features(batch)
        if training or self.stat_kernels is None:
            s_emb = lookup(self.params.embeddings, batch.subjects, self.params.unknown_id)
            o_emb = lookup(self.params.embeddings, batch.objects, self.params.unknown_id)
            subject = attend(mu, s_emb)
            obj = attend(mu, o_emb)
            return ModelOutput(subject, obj, [(subject, obj)])
        first, final = spatial_shift_infer(mu, batch, self.params, self.stat_kernels)
        return ModelOutput(final[0], final[1], [first, final])


__all__ = [
    "BaselineParams",
    "CooccurrenceModel",
    "SpatialShiftModel",
    "VrdModel",
    "cooccurrence_infer",
    "spatial_shift_infer",
    "vrd_infer",
]
