"""Walk a scene-graph path, alternating shift and attend to localise every node."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal

import numpy as np

from .errors import ValidationError
from .models.base import AttentionMap, attend, lookup
from .models.ssas import SsasParams, modulated_attend, shift
from .scenes.models import Vocabulary
from .tensor import Tensor

logger = logging.getLogger(__name__)

Direction = Literal["forward", "inverse"]
_DIRECTIONS = {"fwd": "forward", "forward": "forward", "inv": "inverse", "inverse": "inverse"}


@dataclass(frozen=True)
class GraphEdge:
    src: int
    predicate: int
    dst: int
    direction: Direction = "forward"


@dataclass
class SceneGraph:
    """Nodes are entity categories; ``path`` is the walk to traverse from ``start``."""

    nodes: List[int]
    path: List[GraphEdge]
    start: int = 0

    def validate(self, n_categories: int, n_predicates: int) -> None:
        """Check ids and that the path is a contiguous walk starting at ``start``."""
        for category in self.nodes:
            if not 0 <= category < n_categories:
                raise ValidationError(f"node category id {category} is out of range")
        if not 0 <= self.start < len(self.nodes):
            raise ValidationError(f"start node {self.start} does not exist")
        current = self.start
        for step, edge in enumerate(self.path):
            if not (0 <= edge.src < len(self.nodes) and 0 <= edge.dst < len(self.nodes)):
                raise ValidationError(f"path step {step} references a missing node")
            if not 0 <= edge.predicate < n_predicates:
                raise ValidationError(f"path step {step} has unknown predicate id {edge.predicate}")
            if edge.direction not in ("forward", "inverse"):
                raise ValidationError(f"path step {step} has direction {edge.direction!r}")
            if edge.src != current:
                raise ValidationError(
                    f"path is discontinuous at step {step}: expected to leave node {current}, "
                    f"edge starts at {edge.src}"
                )
            current = edge.dst


def parse_graph(data: Dict, vocabulary: Vocabulary) -> SceneGraph:
    """Build a graph from {"nodes": [...], "path": [{"src","p","dst","dir"}], "start": i}."""
    try:
        nodes = [vocabulary.category_id(name) for name in data["nodes"]]
        path = []
        for step in data.get("path", []):
            direction = _DIRECTIONS.get(step.get("dir", "fwd"))
            if direction is None:
                raise ValidationError(f"unknown edge direction {step.get('dir')!r}")
            path.append(
                GraphEdge(
                    src=int(step["src"]),
                    predicate=vocabulary.predicate_id(step["p"]),
                    dst=int(step["dst"]),
                    direction=direction,
                )
            )
    except (KeyError, TypeError) as e:
        raise ValidationError(f"malformed scene graph: {e}") from e
    graph = SceneGraph(nodes=nodes, path=path, start=int(data.get("start", 0)))
    graph.validate(len(vocabulary.categories), len(vocabulary.predicates))
    return graph


def load_graph(path: str | Path, vocabulary: Vocabulary) -> SceneGraph:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValidationError(f"{path} is not valid JSON: {e}") from e
    return parse_graph(data, vocabulary)


def traverse(mu: Tensor, graph: SceneGraph, params: SsasParams) -> Dict[int, AttentionMap]:
    """
    Attention for every visited node, keyed by node index in first-visit order.

    A revisited node keeps its position but takes the latest map.
    """
    graph.validate(params.unknown_id, params.n_predicates)
    def embedding(node: int) -> Tensor:
        return lookup(params.embeddings, np.int64(graph.nodes[node]), params.unknown_id)

    maps: Dict[int, AttentionMap] = {graph.start: attend(mu, embedding(graph.start))}
    current = graph.start
    for edge in graph.path:
        kernels = params.predicate_kernels(np.int64(edge.predicate))
        stack = kernels.forward if edge.direction == "forward" else kernels.inverse
        moved = shift(maps[current].activated, stack)
        maps[edge.dst] = modulated_attend(moved.activated, mu, embedding(edge.dst))
        current = edge.dst
    logger.debug("Traversed %d edges over %d nodes", len(graph.path), len(maps))
    return maps


def argmax_cell(attention: AttentionMap) -> List[int]:
    logits = attention.logits.values
    return [int(v) for v in np.unravel_index(int(np.argmax(logits)), logits.shape)]
