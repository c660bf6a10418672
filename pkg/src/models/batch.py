"""Per-scene feature caching and collation of query examples into batches."""

from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..scenes.models import Scene, Vocabulary
from ..scenes.raster import rasterize
from ..tensor import Tensor
from .base import QueryBatch
from .encoder import oracle_encode
from .query import Query, QueryExample, build_queries


class SceneCache:
    """Lazily computed oracle feature maps or image tensors, one per scene."""

    def __init__(
        self,
        scenes: Sequence[Scene],
        vocabulary: Vocabulary,
        grid_size: int,
        mode: str = "oracle",
        threads: int = 1,
    ):
        self.scenes = list(scenes)
        self.vocabulary = vocabulary
        self.grid_size = grid_size
        self.mode = mode
        self.threads = threads
        self._arrays: Dict[int, np.ndarray] = {}

    def _compute(self, index: int) -> np.ndarray:
        scene = self.scenes[index]
        if self.mode == "oracle":
            return oracle_encode(scene, self.vocabulary, self.grid_size).grid.values
        return rasterize(scene, self.vocabulary).values

    def warm(self) -> None:
        """Fill the cache for every scene (in parallel when threads > 1)."""
        todo = [i for i in range(len(self.scenes)) if i not in self._arrays]
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                results = list(pool.map(self._compute, todo))
        else:
            results = [self._compute(i) for i in todo]
        self._arrays.update(zip(todo, results))

    def get(self, index: int) -> np.ndarray:
        if index not in self._arrays:
            self._arrays[index] = self._compute(index)
        return self._arrays[index]

    def examples(self) -> List[QueryExample]:
        """Every query of every scene, in scene order."""
        out: List[QueryExample] = []
        for index, scene in enumerate(self.scenes):
            out.extend(build_queries(scene, index, self.vocabulary, self.grid_size))
        return out


def collate(
    examples: Sequence[QueryExample],
    cache: SceneCache,
    queries: Optional[Sequence[Query]] = None,
    dtype=np.float32,
) -> QueryBatch:
    """Stack examples into a batch; ``queries`` overrides (e.g. masks) the stored ones."""
    queries = list(queries) if queries is not None else [e.query for e in examples]
    stacked = np.stack([cache.get(e.scene_index) for e in examples]).astype(dtype, copy=False)
    batch = QueryBatch(
        subjects=np.array([q.subject for q in queries], dtype=np.int64),
        predicates=np.array([q.predicate for q in queries], dtype=np.int64),
        objects=np.array([q.object for q in queries], dtype=np.int64),
        subject_masks=np.stack([e.subject_mask.grid for e in examples]).astype(np.float64),
        object_masks=np.stack([e.object_mask.grid for e in examples]).astype(np.float64),
    )
    if cache.mode == "oracle":
        batch.features = Tensor(stacked, dtype=dtype)
    else:
        batch.images = Tensor(stacked, dtype=dtype)
    return batch


def single_query_batch(cache: SceneCache, index: int, query: Query, dtype=np.float32) -> QueryBatch:
    """A batch of one query against scene ``index``, without ground truth."""
    batch = QueryBatch(
        subjects=np.array([query.subject], dtype=np.int64),
        predicates=np.array([query.predicate], dtype=np.int64),
        objects=np.array([query.object], dtype=np.int64),
    )
    stacked = Tensor(cache.get(index)[None], dtype=dtype)
    if cache.mode == "oracle":
        batch.features = stacked
    else:
        batch.images = stacked
    return batch
