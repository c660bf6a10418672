"""Shared interface for SSAS and the baseline models."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import CheckpointError
from ..tensor import Tensor, bce_with_logits, channel_dot, relu, take, total
from .query import MASKED


@dataclass
class AttentionMap:
    """Post-ReLU map (feeds feature modulation) and its pre-activation logits."""

    activated: Tensor
    logits: Tensor


@dataclass
class QueryBatch:
    """A stack of queries with their feature maps (or images) and ground truth."""

    subjects: np.ndarray
    predicates: np.ndarray
    objects: np.ndarray
    features: Optional[Tensor] = None
    images: Optional[Tensor] = None
    subject_masks: Optional[np.ndarray] = None
    object_masks: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.subjects)


@dataclass
class ModelOutput:
    """Final subject/object maps plus the per-iteration (subject, object) trace."""

    subject: AttentionMap
    object: AttentionMap
    trace: List[Tuple[AttentionMap, AttentionMap]] = field(default_factory=list)


def attend(mu: Tensor, embedding: Tensor) -> AttentionMap:
    """
    Att(μ, e) = ReLU(μ · e): per-cell match between features and an entity vector.

    ``mu`` is (L, L, C) with a (C,) embedding, or (B, L, L, C) with (B, C). There is
    no bias: a cell whose features are all zero scores exactly zero.
    """
    logits = channel_dot(mu, embedding)
    return AttentionMap(activated=relu(logits), logits=logits)


def entity_rows(ids: np.ndarray, unknown_id: int) -> np.ndarray:
    """Embedding rows for entity ids, sending MASKED to the unknown row."""
    ids = np.asarray(ids, dtype=np.int64)
    return np.where(ids == MASKED, unknown_id, ids)


def lookup(table: Tensor, ids: np.ndarray, unknown_id: int) -> Tensor:
    return take(table, entity_rows(ids, unknown_id))


def uniform_init(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def embedding_init(rng: np.random.Generator, shape, scale: float) -> np.ndarray:
    """Half-normal entries: every attention map starts active on the whole grid."""
    return np.abs(rng.normal(0.0, scale, size=shape))


class ReferringModel(ABC):
    """Abstract base class: maps a query batch to subject and object attention."""

    kind: str = ""

    def __init__(self, encoder, iterations: int = 0, supervise_all_iterations: bool = False):
        self.encoder = encoder
        self.iterations = iterations
        self.supervise_all_iterations = supervise_all_iterations

    @abstractmethod
    def own_parameters(self) -> Dict[str, Tensor]:
        """Trainable tensors of the model itself, excluding the encoder."""
        pass

    @abstractmethod
    def forward(self, batch: QueryBatch, training: bool = False) -> ModelOutput:
        """Localise subject and object for every query in the batch."""
        pass

    def parameters(self) -> Dict[str, Tensor]:
        params = dict(self.own_parameters())
        params.update({f"encoder/{k}": v for k, v in self.encoder.parameters().items()})
        return params

    def extra_arrays(self) -> Dict[str, np.ndarray]:
        """Non-trainable arrays that belong in a checkpoint."""
        return {}

    def load_extra_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        pass

    def features(self, batch: QueryBatch) -> Tensor:
        return self.encoder.encode_batch(batch)

    def loss(self, batch: QueryBatch) -> Tensor:
        """BCE on final subject and object logits, equal weights (optionally every iteration)."""
        output = self.forward(batch, training=True)
        pairs = output.trace if self.supervise_all_iterations and output.trace else []
        if not pairs:
            pairs = [(output.subject, output.object)]
        terms = []
        for subject, obj in pairs:
            terms.append(bce_with_logits(subject.logits, batch.subject_masks))
            terms.append(bce_with_logits(obj.logits, batch.object_masks))
        return total(terms)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {name: p.values for name, p in self.parameters().items()}
        arrays.update(self.extra_arrays())
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        """Copy checkpoint arrays into the model; every shape must match exactly."""
        params = self.parameters()
        expected = set(params) | set(self.extra_arrays())
        missing = expected - set(arrays)
        unexpected = set(arrays) - expected
        if missing or unexpected:
            raise CheckpointError(
                f"Checkpoint arrays do not match a {self.kind} model: "
                f"missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, param in params.items():
            if arrays[name].shape != param.shape:
                raise CheckpointError(
                    f"Array {name} has shape {arrays[name].shape}, config expects {param.shape}"
                )
            param.values = np.array(arrays[name], dtype=param.dtype)
        self.load_extra_arrays({k: v for k, v in arrays.items() if k not in params})
