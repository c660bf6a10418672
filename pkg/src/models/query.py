"""Referring-relationship queries, their ground truth and masking."""

from dataclasses import dataclass, replace
from typing import Dict, List, Literal, Tuple

import numpy as np

from ..errors import ValidationError
from ..scenes.geometry import GroundMask, box_to_mask, union_mask
from ..scenes.models import Scene, Vocabulary

MASKED = -1

MaskMode = Literal["none", "subject", "object", "both"]
MASK_MODES = ("none", "subject", "object", "both")


@dataclass(frozen=True)
class Query:
    """⟨subject, predicate, object⟩ by category/predicate id; MASKED hides an entity."""

    subject: int
    predicate: int
    object: int

    def describe(self, vocabulary: Vocabulary) -> str:
        s, o = vocabulary.category_names(
            [self.subject if self.subject != MASKED else vocabulary.unknown_id,
             self.object if self.object != MASKED else vocabulary.unknown_id]
        )
        return f"<{s}, {vocabulary.predicates[self.predicate]}, {o}>"


@dataclass(frozen=True)
class QueryExample:
    """One query against one scene together with both ground-truth grids."""

    scene_index: int
    scene_id: str
    query: Query
    subject_mask: GroundMask
    object_mask: GroundMask
    subject_ambiguous: bool
    object_ambiguous: bool

    @property
    def ambiguous(self) -> bool:
        return self.subject_ambiguous or self.object_ambiguous


def mask_query(query: Query, drop_rate: float, rng: np.random.Generator) -> Query:
    """
    Independently hide the subject and the object, each with probability
    ``drop_rate``. Always consumes exactly two draws from ``rng``.
    """
    drop_subject = rng.random() < drop_rate
    drop_object = rng.random() < drop_rate
    return replace(
        query,
        subject=MASKED if drop_subject else query.subject,
        object=MASKED if drop_object else query.object,
    )


def apply_mask_mode(query: Query, mode: str) -> Query:
    """Fixed masking used by the evaluation conditions."""
    if mode not in MASK_MODES:
        raise ValidationError(f"Unknown mask mode {mode!r}; expected one of {MASK_MODES}")
    return replace(
        query,
        subject=MASKED if mode in ("subject", "both") else query.subject,
        object=MASKED if mode in ("object", "both") else query.object,
    )


def parse_query(text: str, vocabulary: Vocabulary) -> Query:
    """Parse "S,P,O" (names); "_" or "___" marks a masked entity."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"Query must look like 'subject,predicate,object', got {text!r}")

    def entity(name: str) -> int:
        return MASKED if name.strip("_") == "" else vocabulary.category_id(name)

    return Query(entity(parts[0]), vocabulary.predicate_id(parts[1]), entity(parts[2]))


def build_queries(
    scene: Scene, scene_index: int, vocabulary: Vocabulary, grid_size: int
) -> List[QueryExample]:
    """
    Every distinct (subject category, predicate, object category) in the scene.

    Ground truth for each role is the union of the cells of every entity that
    takes that role in a matching relationship. A role is ambiguous when the
    scene holds an instance of its category outside that union.
    """
    grouped: Dict[Tuple[int, int, int], Tuple[set, set]] = {}
    for rel in scene.relationships:
        key = (
            scene.entities[rel.subject_idx].category,
            rel.predicate,
            scene.entities[rel.object_idx].category,
        )
        subjects, objects = grouped.setdefault(key, (set(), set()))
        subjects.add(rel.subject_idx)
        objects.add(rel.object_idx)

    def mask(indices) -> GroundMask:
        return union_mask(
            box_to_mask(scene.entities[i].bbox, scene.width, grid_size, scene.height, i)
            for i in sorted(indices)
        )

    examples = []
    for key in sorted(grouped):
        subjects, objects = grouped[key]
        s_cat, predicate, o_cat = key
        examples.append(
            QueryExample(
                scene_index=scene_index,
                scene_id=scene.id,
                query=Query(s_cat, predicate, o_cat),
                subject_mask=mask(subjects),
                object_mask=mask(objects),
                subject_ambiguous=scene.category_count(s_cat) > len(subjects),
                object_ambiguous=scene.category_count(o_cat) > len(objects),
            )
        )
    return examples
