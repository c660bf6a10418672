"""Scene records: entities, relationships and the vocabularies naming them."""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

from ..config_models import GenConfig
from ..errors import ValidationError

BBox = Tuple[int, int, int, int]


@dataclass(frozen=True)
class Entity:
    """An object instance: a category id and a pixel box [x0, y0, x1, y1)."""

    category: int
    bbox: BBox

    @property
    def center(self) -> Tuple[float, float]:
        x0, y0, x1, y1 = self.bbox
        return (x0 + x1) / 2.0, (y0 + y1) / 2.0

    @property
    def area(self) -> int:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class Relationship:
    """A ⟨subject, predicate, object⟩ triple over entity indices."""

    subject_idx: int
    predicate: int
    object_idx: int


@dataclass(frozen=True)
class Scene:
    """A synthetic world, reconstructible from its generation config and seed."""

    id: str
    width: int
    height: int
    entities: Tuple[Entity, ...]
    relationships: Tuple[Relationship, ...]
    rng_seed: int

    def __post_init__(self):
        for entity in self.entities:
            x0, y0, x1, y1 = entity.bbox
            if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                raise ValidationError(f"{self.id}: box {entity.bbox} outside the image")
        n = len(self.entities)
        for rel in self.relationships:
            if not (0 <= rel.subject_idx < n and 0 <= rel.object_idx < n):
                raise ValidationError(f"{self.id}: relationship {rel} indexes a missing entity")
            if rel.subject_idx == rel.object_idx:
                raise ValidationError(f"{self.id}: relationship {rel} relates an entity to itself")

    def category_count(self, category: int) -> int:
        return sum(1 for e in self.entities if e.category == category)

    @property
    def is_ambiguous(self) -> bool:
        categories = [e.category for e in self.entities]
        return len(set(categories)) < len(categories)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered category and predicate names; the id is the list position."""

    categories: Tuple[str, ...]
    predicates: Tuple[str, ...]
    _category_ids: dict = field(init=False, repr=False, compare=False)
    _predicate_ids: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_category_ids", {c: i for i, c in enumerate(self.categories)})
        object.__setattr__(self, "_predicate_ids", {p: i for i, p in enumerate(self.predicates)})

    @classmethod
    def from_config(cls, config: GenConfig) -> "Vocabulary":
        return cls(tuple(config.categories), tuple(config.predicates))

    @classmethod
    def from_lists(cls, categories: Sequence[str], predicates: Sequence[str]) -> "Vocabulary":
        return cls(tuple(categories), tuple(predicates))

    @property
    def unknown_id(self) -> int:
        """Row of the learned embedding used for masked entities."""
        return len(self.categories)

    def category_id(self, name: str) -> int:
        try:
            return self._category_ids[name]
        except KeyError:
            raise ValidationError(f"Unknown entity category: {name!r}") from None

    def predicate_id(self, name: str) -> int:
        try:
            return self._predicate_ids[name]
        except KeyError:
            raise ValidationError(f"Unknown predicate: {name!r}") from None

    def to_dict(self) -> dict:
        return {"categories": list(self.categories), "predicates": list(self.predicates)}

    def category_names(self, ids: Sequence[int]) -> List[str]:
        return [self.categories[i] if i < len(self.categories) else "___" for i in ids]
