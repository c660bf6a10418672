"""Referring-relationship models: SSAS, its baselines and their shared pieces."""

from .base import AttentionMap, ModelOutput, QueryBatch, ReferringModel, attend
from .baselines import (
    BaselineParams,
    CooccurrenceModel,
    SpatialShiftModel,
    VrdModel,
    cooccurrence_infer,
    spatial_shift_infer,
    vrd_infer,
)
from .batch import SceneCache, collate, single_query_batch
from .encoder import CnnEncoder, FeatureMap, OracleEncoder, build_encoder, cnn_encode, oracle_encode
from .factory import MODEL_KINDS, create_model
from .query import (
    MASKED,
    Query,
    QueryExample,
    apply_mask_mode,
    build_queries,
    mask_query,
    parse_query,
)
from .ssas import (
    AttentionParams,
    PredicateKernels,
    SsasModel,
    SsasParams,
    infer_rollout,
    shift,
    validate_shift_geometry,
)

__all__ = [
    "AttentionMap",
    "ModelOutput",
    "QueryBatch",
    "ReferringModel",
    "attend",
    "BaselineParams",
    "CooccurrenceModel",
    "SpatialShiftModel",
    "VrdModel",
    "cooccurrence_infer",
    "spatial_shift_infer",
    "vrd_infer",
    "SceneCache",
    "collate",
    "single_query_batch",
    "CnnEncoder",
    "FeatureMap",
    "OracleEncoder",
    "build_encoder",
    "cnn_encode",
    "oracle_encode",
    "MODEL_KINDS",
    "create_model",
    "MASKED",
    "Query",
    "QueryExample",
    "apply_mask_mode",
    "build_queries",
    "mask_query",
    "parse_query",
    "AttentionParams",
    "PredicateKernels",
    "SsasModel",
    "SsasParams",
    "infer_rollout",
    "shift",
    "validate_shift_geometry",
]
