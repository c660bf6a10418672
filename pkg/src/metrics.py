"""
Mean IoU and KL divergence between predicted attention and ground truth,
threshold selection, and the per-query / per-predicate / per-entity reports.
"""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Collection, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from .config_models import EvalConfig
from .errors import DatasetError, ValidationError
from .models.base import ReferringModel
from .models.batch import SceneCache, collate
from .models.query import QueryExample, apply_mask_mode, build_queries
from .scenes.geometry import GroundMask, box_to_mask, union_mask
from .scenes.models import Scene, Vocabulary
from .tensor import Tensor

logger = logging.getLogger(__name__)

REPORT_FIELDS = ("category", "n", "s_iou", "o_iou", "s_kl", "o_kl")
QUERY_FIELDS = (
    "scene_id",
    "subject",
    "predicate",
    "object",
    "s_ambiguous",
    "o_ambiguous",
    "s_iou",
    "o_iou",
    "s_kl",
    "o_kl",
)

Prediction = Tuple[np.ndarray, np.ndarray]


def _grid(value) -> np.ndarray:
    if isinstance(value, GroundMask):
        value = value.grid
    elif isinstance(value, Tensor):
        value = value.values
    return np.asarray(value, dtype=np.float64)


def mean_iou(logits, gt, tau: float) -> float:
    """IoU between {sigmoid(logit) > τ} and the ground-truth cells; two empty sets score 1."""
    predicted = expit(_grid(logits)) > tau
    truth = _grid(gt) > 0
    if predicted.shape != truth.shape:
        raise ValidationError(f"prediction {predicted.shape} and ground truth {truth.shape} differ")
    union = np.logical_or(predicted, truth).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(predicted, truth).sum() / union)


def kl_divergence(gt, logits, eps: float = 1e-12) -> float:
    """KL(g‖q) with g the normalised ground truth and q the softmax of the logits."""
    g = _grid(gt).reshape(-1)
    mass = g.sum()
    if mass <= 0:
        raise ValidationError("ground truth has no cells")
    g = g / mass
    q = softmax(_grid(logits).reshape(-1))
    support = g > 0
    return float(max(0.0, np.sum(g[support] * np.log(g[support] / np.maximum(q[support], eps)))))


@dataclass
class QueryScore:
    scene_id: str
    subject: str
    predicate: str
    object: str
    s_ambiguous: bool
    o_ambiguous: bool
    s_iou: float
    o_iou: float
    s_kl: float
    o_kl: float

    @property
    def ambiguous(self) -> bool:
        return self.s_ambiguous or self.o_ambiguous


@dataclass
class AggregateRow:
    category: str
    n: int
    s_iou: float
    o_iou: float
    s_kl: float
    o_kl: float


@dataclass
class EvalReport:
    """Per-query scores plus overall, ambiguous-only, per-predicate and per-entity aggregates."""

    tau: float
    mask_mode: str
    scores: List[QueryScore]
    overall: AggregateRow
    ambiguous: AggregateRow
    by_predicate: List[AggregateRow] = field(default_factory=list)
    by_entity: List[AggregateRow] = field(default_factory=list)


def _mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else math.nan


def aggregate(label: str, scores: Sequence[QueryScore]) -> AggregateRow:
    return AggregateRow(
        category=label,
        n=len(scores),
        s_iou=_mean([s.s_iou for s in scores]),
        o_iou=_mean([s.o_iou for s in scores]),
        s_kl=_mean([s.s_kl for s in scores]),
        o_kl=_mean([s.o_kl for s in scores]),
    )


def entity_rows(scores: Sequence[QueryScore]) -> List[AggregateRow]:
    """One row per category; subject columns average its subject-role queries, object likewise."""
    rows = []
    for name in sorted({s.subject for s in scores} | {s.object for s in scores}):
        as_subject = [s for s in scores if s.subject == name]
        as_object = [s for s in scores if s.object == name]
        rows.append(
            AggregateRow(
                category=name,
                n=sum(1 for s in scores if name in (s.subject, s.object)),
                s_iou=_mean([s.s_iou for s in as_subject]),
                o_iou=_mean([s.o_iou for s in as_object]),
                s_kl=_mean([s.s_kl for s in as_subject]),
                o_kl=_mean([s.o_kl for s in as_object]),
            )
        )
    return rows


def ambiguous_row(scores: Sequence[QueryScore]) -> AggregateRow:
    """Subject columns average queries with an ambiguous subject, object columns likewise."""
    subjects = [s for s in scores if s.s_ambiguous]
    objects = [s for s in scores if s.o_ambiguous]
    return AggregateRow(
        category="ambiguous",
        n=sum(1 for s in scores if s.ambiguous),
        s_iou=_mean([s.s_iou for s in subjects]),
        o_iou=_mean([s.o_iou for s in objects]),
        s_kl=_mean([s.s_kl for s in subjects]),
        o_kl=_mean([s.o_kl for s in objects]),
    )


def predict(
    model: ReferringModel,
    cache: SceneCache,
    examples: Sequence[QueryExample],
    mask_mode: str = "none",
    batch_size: int = 128,
    threads: int = 1,
) -> List[Prediction]:
    """Final (subject, object) logits per example, in example order."""
    chunks = [examples[i : i + batch_size] for i in range(0, len(examples), batch_size)]

    def run(chunk: Sequence[QueryExample]) -> List[Prediction]:
        queries = [apply_mask_mode(e.query, mask_mode) for e in chunk]
        output = model.forward(collate(chunk, cache, queries))
        s = output.subject.logits.values.astype(np.float64)
        o = output.object.logits.values.astype(np.float64)
        return list(zip(s, o))

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(chunk) for chunk in chunks]
    return [p for chunk in results for p in chunk]


def best_tau(
    predictions: Sequence[Prediction], examples: Sequence[QueryExample], grid: Sequence[float]
) -> float:
    """τ from ``grid`` maximising the mean of subject and object IoU; ties go to the smaller τ."""
    grid = sorted(grid)
    best, best_score = grid[0], -math.inf
    for tau in grid:
        score = _mean(
            [
                0.5 * (mean_iou(s, e.subject_mask, tau) + mean_iou(o, e.object_mask, tau))
                for (s, o), e in zip(predictions, examples)
            ]
        )
        if score > best_score:
            best, best_score = tau, score
    logger.info("Selected tau=%.2f (mean IoU %.4f)", best, best_score)
    return best


def involving(
    examples: Sequence[QueryExample], categories: Optional[Collection[int]]
) -> List[QueryExample]:
    """Queries whose subject or object category is in ``categories``; all of them for None."""
    if categories is None:
        return list(examples)
    wanted = set(categories)
    chosen = [e for e in examples if {e.query.subject, e.query.object} & wanted]
    if not chosen:
        raise DatasetError(f"No query involves categories {sorted(wanted)}")
    return chosen


def select_tau(
    model: ReferringModel,
    cache: SceneCache,
    config: EvalConfig,
    mask_mode: str = "none",
    threads: int = 1,
    only_categories: Optional[Collection[int]] = None,
) -> float:
    examples = involving(cache.examples(), only_categories)
    predictions = predict(model, cache, examples, mask_mode, config.batch_size, threads)
    return best_tau(predictions, examples, config.tau_grid)


def score_queries(
    predictions: Sequence[Prediction],
    examples: Sequence[QueryExample],
    vocabulary: Vocabulary,
    tau: float,
    kl_eps: float = 1e-12,
) -> List[QueryScore]:
    scores = []
    for (s, o), example in zip(predictions, examples):
        query = example.query
        scores.append(
            QueryScore(
                scene_id=example.scene_id,
                subject=vocabulary.categories[query.subject],
                predicate=vocabulary.predicates[query.predicate],
                object=vocabulary.categories[query.object],
                s_ambiguous=example.subject_ambiguous,
                o_ambiguous=example.object_ambiguous,
                s_iou=mean_iou(s, example.subject_mask, tau),
                o_iou=mean_iou(o, example.object_mask, tau),
                s_kl=kl_divergence(example.subject_mask, s, kl_eps),
                o_kl=kl_divergence(example.object_mask, o, kl_eps),
            )
        )
    return scores


def summarize(scores: Sequence[QueryScore], tau: float, mask_mode: str = "none") -> EvalReport:
    """Aggregate per-query scores; the result does not depend on their order."""
    predicates = sorted({s.predicate for s in scores})
    return EvalReport(
        tau=tau,
        mask_mode=mask_mode,
        scores=list(scores),
        overall=aggregate("all", scores),
        ambiguous=ambiguous_row(scores),
        by_predicate=[aggregate(p, [s for s in scores if s.predicate == p]) for p in predicates],
        by_entity=entity_rows(scores),
    )


def build_report(
    model: ReferringModel,
    cache: SceneCache,
    config: EvalConfig,
    tau: Optional[float] = None,
    mask_mode: str = "none",
    threads: int = 1,
    only_categories: Optional[Collection[int]] = None,
) -> EvalReport:
    """
    Score every query of the cached split with threshold ``tau`` (default from
    config), or only those naming one of ``only_categories``.
    """
    tau = config.tau if tau is None else tau
    examples = involving(cache.examples(), only_categories)
    predictions = predict(model, cache, examples, mask_mode, config.batch_size, threads)
    scores = score_queries(predictions, examples, cache.vocabulary, tau, config.kl_eps)
    report = summarize(scores, tau, mask_mode)
    logger.info(
        "Evaluated %d queries: S-IoU %.4f, O-IoU %.4f (ambiguous %.4f / %.4f)",
        report.overall.n,
        report.overall.s_iou,
        report.overall.o_iou,
        report.ambiguous.s_iou,
        report.ambiguous.o_iou,
    )
    return report


def _write_rows(path: Path, fields: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(asdict(row))


def write_report(report: EvalReport, out_dir: str | Path) -> Dict[str, Path]:
    """metrics.csv, report_by_predicate.csv, report_by_entity.csv and summary.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "metrics": out_dir / "metrics.csv",
        "by_predicate": out_dir / "report_by_predicate.csv",
        "by_entity": out_dir / "report_by_entity.csv",
        "summary": out_dir / "summary.json",
    }
    _write_rows(paths["metrics"], QUERY_FIELDS, report.scores)
    _write_rows(paths["by_predicate"], REPORT_FIELDS, report.by_predicate)
    _write_rows(paths["by_entity"], REPORT_FIELDS, report.by_entity)
    summary = {
        "tau": report.tau,
        "mask_mode": report.mask_mode,
        "overall": asdict(report.overall),
        "ambiguous": asdict(report.ambiguous),
    }
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths


def duplicate_iou_cap(scenes: Sequence[Scene], grid_size: int) -> float:
    """
    Mean IoU a predicate-blind model reaches on ambiguous roles when it
    highlights every instance of the queried category, pooled over the
    subject and object roles that are ambiguous.
    """
    values = []
    for index, scene in enumerate(scenes):
        for example in build_queries(scene, index, None, grid_size):
            roles = (
                (example.subject_ambiguous, example.query.subject, example.subject_mask),
                (example.object_ambiguous, example.query.object, example.object_mask),
            )
            for category, truth in ((c, t) for ambiguous, c, t in roles if ambiguous):
                everything = union_mask(
                    box_to_mask(e.bbox, scene.width, grid_size, scene.height, i)
                    for i, e in enumerate(scene.entities)
                    if e.category == category
                )
                inter = np.logical_and(everything.grid, truth.grid).sum()
                union = np.logical_or(everything.grid, truth.grid).sum()
                values.append(inter / union)
    return _mean(values)
