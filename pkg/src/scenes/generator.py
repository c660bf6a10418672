"""CLEVR-style 2D scene generation with controllable category ambiguity."""

import logging
from collections import Counter, defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Sequence

import numpy as np

from ..config_models import GenConfig
from ..errors import GenerationError
from .geometry import overlap_ratio
from .models import Entity, Relationship, Scene, Vocabulary

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
# Retries per scene index before the whole split gives up.
MAX_SEED_RETRIES = 100


def scene_seed(master_seed: int, index: int, attempt: int = 0, split: str = "train") -> int:
    """64-bit seed for one scene, derived from the master seed and its position."""
    sequence = np.random.SeedSequence([master_seed, SPLITS.index(split), index, attempt])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def derive_relationships(
    entities: Sequence[Entity], vocabulary: Vocabulary, margin: float
) -> List[Relationship]:
    """
    Every spatial predicate that holds between ordered entity pairs.

    ⟨a, left, b⟩ means a is left of b: center_x(a) + margin < center_x(b).
    Image y grows downward, so ⟨a, above, b⟩ means center_y(a) + margin < center_y(b).
    """
    tests = {
        "left": lambda a, b: a[0] + margin < b[0],
        "right": lambda a, b: a[0] > b[0] + margin,
        "above": lambda a, b: a[1] + margin < b[1],
        "below": lambda a, b: a[1] > b[1] + margin,
    }
    relationships = []
    for s, subject in enumerate(entities):
        for o, obj in enumerate(entities):
            if s == o:
                continue
            for p, name in enumerate(vocabulary.predicates):
                if tests[name](subject.center, obj.center):
                    relationships.append(Relationship(s, p, o))
    return relationships


def _choose_categories(config: GenConfig, n: int, rng: np.random.Generator) -> List[int]:
    n_categories = len(config.categories)
    ambiguous = n >= 2 and rng.random() < config.ambiguous_fraction
    if n > n_categories:
        ambiguous = True
    if not ambiguous:
        return [int(c) for c in rng.choice(n_categories, size=n, replace=False)]
    duplicated = int(rng.integers(n_categories))
    others = [c for c in range(n_categories) if c != duplicated]
    rest = [int(c) for c in rng.choice(others, size=n - 2, replace=False)]
    categories = [duplicated, duplicated] + rest
    rng.shuffle(categories)
    return categories


def generate_scene(config: GenConfig, seed: int, scene_id: str = "scene") -> Scene:
    """
    Place entities by rejection sampling and derive their relationships.

    Deterministic in (config, seed). Raises GenerationError when placement
    needs more than ``config.max_attempts`` samples.
    """
    rng = np.random.default_rng(seed)
    vocabulary = Vocabulary.from_config(config)
    size = config.image_size
    n = int(rng.integers(config.min_entities, config.max_entities + 1))
    categories = _choose_categories(config, n, rng)

    low, high = config.border_px, size - config.border_px
    boxes = []
    attempts = 0
    while len(boxes) < n:
        if attempts >= config.max_attempts:
            raise GenerationError(
                f"{scene_id}: placed {len(boxes)}/{n} entities after {attempts} attempts"
            )
        attempts += 1
        w = int(rng.integers(config.min_side, config.max_side + 1))
        h = int(rng.integers(config.min_side, config.max_side + 1))
        x0 = int(rng.integers(low, high - w + 1))
        y0 = int(rng.integers(low, high - h + 1))
        box = (x0, y0, x0 + w, y0 + h)
        if all(overlap_ratio(box, other) <= config.overlap_tolerance for other in boxes):
            boxes.append(box)

    entities = tuple(Entity(c, b) for c, b in zip(categories, boxes))
    relationships = tuple(derive_relationships(entities, vocabulary, config.margin))
    return Scene(scene_id, size, size, entities, relationships, seed)


def _generate_index(config: GenConfig, master_seed: int, split: str, index: int) -> Scene:
    scene_id = f"{split}_{index:06d}"
    for attempt in range(MAX_SEED_RETRIES):
        seed = scene_seed(master_seed, index, attempt, split)
        try:
            return generate_scene(config, seed, scene_id)
        except GenerationError as e:
            logger.debug("%s; retrying with next seed", e)
    raise GenerationError(f"{scene_id}: no seed out of {MAX_SEED_RETRIES} could be placed")


def generate_split(
    config: GenConfig, master_seed: int, split: str, count: int, threads: int = 1
) -> List[Scene]:
    """Generate ``count`` scenes of one split; order and content ignore ``threads``."""
    if split not in SPLITS:
        raise ValueError(f"Unknown split {split!r}; expected one of {SPLITS}")
    indices = range(count)
    if threads <= 1:
        return [_generate_index(config, master_seed, split, i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: _generate_index(config, master_seed, split, i), indices))


def census(scenes: Sequence[Scene], vocabulary: Vocabulary) -> Dict:
    """Dataset-level statistics: ambiguity, predicate counts, entity counts."""
    predicate_counts = Counter()
    entity_counts = Counter()
    queries = ambiguous_queries = 0
    for scene in scenes:
        entity_counts[len(scene.entities)] += 1
        # (s, p, o) -> (subject indices, object indices) of the ground truth
        triples = defaultdict(lambda: (set(), set()))
        for rel in scene.relationships:
            predicate_counts[vocabulary.predicates[rel.predicate]] += 1
            s_cat = scene.entities[rel.subject_idx].category
            o_cat = scene.entities[rel.object_idx].category
            subjects, objects = triples[(s_cat, rel.predicate, o_cat)]
            subjects.add(rel.subject_idx)
            objects.add(rel.object_idx)
        queries += len(triples)
        ambiguous_queries += sum(
            1
            for (s, _, o), (subjects, objects) in triples.items()
            if scene.category_count(s) > len(subjects) or scene.category_count(o) > len(objects)
        )
    n = len(scenes)
    return {
        "scenes": n,
        "ambiguous_fraction": (sum(s.is_ambiguous for s in scenes) / n) if n else 0.0,
        "relationships": sum(predicate_counts.values()),
        "queries": queries,
        "ambiguous_query_fraction": (ambiguous_queries / queries) if queries else 0.0,
        "per_predicate": {p: predicate_counts.get(p, 0) for p in vocabulary.predicates},
        "entity_counts": {str(k): entity_counts[k] for k in sorted(entity_counts)},
    }
