"""Mini-batch training loop shared by SSAS and every baseline."""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .config_models import TrainConfig
from .errors import NumericError
from .models.base import ReferringModel
from .models.batch import SceneCache, collate
from .models.query import QueryExample, mask_query
from .tensor import OptimizerState, RMSProp

logger = logging.getLogger(__name__)

LOG_FIELDS = ("epoch", "split", "loss", "lr", "seed")


@dataclass
class EpochRecord:
    """One row of the training log."""

    epoch: int
    split: str
    loss: float
    lr: float
    seed: int


def sample_queries(
    examples: Sequence[QueryExample], per_scene: int, rng: np.random.Generator
) -> List[QueryExample]:
    """Keep at most ``per_scene`` queries of each scene, chosen with ``rng``."""
    by_scene: Dict[int, List[QueryExample]] = {}
    for example in examples:
        by_scene.setdefault(example.scene_index, []).append(example)
    chosen: List[QueryExample] = []
    for scene_index in sorted(by_scene):
        group = by_scene[scene_index]
        if len(group) <= per_scene:
            chosen.extend(group)
        else:
            picks = np.sort(rng.choice(len(group), size=per_scene, replace=False))
            chosen.extend(group[i] for i in picks)
    return chosen


def parameter_norms(model: ReferringModel) -> Dict[str, float]:
    return {
        name: float(np.linalg.norm(p.values.astype(np.float64)))
        for name, p in model.parameters().items()
    }


class Trainer:
    """
    Runs epochs of shuffled mini-batches with RMSProp; the validation loss of
    each epoch drives the plateau learning-rate decay.
    """

    def __init__(
        self,
        model: ReferringModel,
        config: TrainConfig,
        train_cache: SceneCache,
        val_cache: Optional[SceneCache] = None,
    ):
        self.model = model
        self.config = config
        self.train_cache = train_cache
        self.val_cache = val_cache
        self.optimizer = RMSProp(
            model.parameters(),
            OptimizerState(
                learning_rate=config.learning_rate,
                decay_factor=config.decay_factor,
                plateau_patience=config.plateau_patience,
                rho=config.rho,
                eps=config.eps,
            ),
        )
        self.records: List[EpochRecord] = []
        self.status_callback: Optional[Callable[[str], None]] = None
        self._train_examples = train_cache.examples()
        self._val_batches = self._fixed_validation()

    def set_status_callback(self, callback: Callable[[str], None]) -> None:
        """Set a callback function to receive progress lines."""
        self.status_callback = callback

    def _update_status(self, message: str) -> None:
        logger.info(message)
        if self.status_callback:
            self.status_callback(message)

    def _fixed_validation(self):
        if self.val_cache is None:
            return []
        rng = np.random.default_rng(self.config.seed)
        examples = sample_queries(self.val_cache.examples(), self.config.queries_per_scene, rng)
        return list(self._batches(examples, self.val_cache, rng))

    def _batches(self, examples: Sequence[QueryExample], cache: SceneCache, rng):
        size = self.config.batch_size
        for start in range(0, len(examples), size):
            chunk = examples[start : start + size]
            queries = None
            if self.config.mask_rate > 0:
                queries = [mask_query(e.query, self.config.mask_rate, rng) for e in chunk]
            yield collate(chunk, cache, queries)

    def _check_finite(self, loss: float, epoch: int, batch_index: int) -> None:
        if math.isfinite(loss):
            return
        diagnostics = {
            "epoch": epoch,
            "batch": batch_index,
            "loss": loss,
            "parameter_norms": parameter_norms(self.model),
        }
        raise NumericError(
            f"Non-finite training loss at epoch {epoch}, batch {batch_index}", diagnostics
        )

    def train_epoch(self, epoch: int) -> float:
        """One pass over a fresh per-scene sample; returns the example-weighted mean loss."""
        rng = np.random.default_rng([self.config.seed, epoch])
        examples = sample_queries(self._train_examples, self.config.queries_per_scene, rng)
        order = rng.permutation(len(examples))
        shuffled = [examples[i] for i in order]

        losses, counts = [], []
        for batch_index, batch in enumerate(self._batches(shuffled, self.train_cache, rng)):
            self.optimizer.zero_grad()
            loss = self.model.loss(batch)
            value = loss.item()
            self._check_finite(value, epoch, batch_index)
            loss.backward()
            self.optimizer.step()
            losses.append(value * len(batch))
            counts.append(len(batch))
        return math.fsum(losses) / max(sum(counts), 1)

    def validation_loss(self) -> float:
        if not self._val_batches:
            return math.nan
        losses = [self.model.loss(b).item() * len(b) for b in self._val_batches]
        return math.fsum(losses) / sum(len(b) for b in self._val_batches)

    def train(self, epochs: Optional[int] = None) -> List[EpochRecord]:
        """Train for ``epochs`` (default from config) and return the accumulated log."""
        epochs = self.config.epochs if epochs is None else epochs
        seed = self.config.seed
        for epoch in range(1, epochs + 1):
            lr = self.optimizer.learning_rate
            train_loss = self.train_epoch(epoch)
            self.records.append(EpochRecord(epoch, "train", train_loss, lr, seed))
            val_loss = self.validation_loss()
            if not math.isnan(val_loss):
                self._check_finite(val_loss, epoch, -1)
                self.records.append(EpochRecord(epoch, "val", val_loss, lr, seed))
                self.optimizer.end_epoch(val_loss)
            self._update_status(
                f"epoch {epoch}/{epochs}: train {train_loss:.4f}, val {val_loss:.4f}, lr {lr:.3g}"
            )
        return self.records


def write_log(path: str | Path, records: Sequence[EpochRecord]) -> None:
    """Write the training log CSV (floats in repr form, so reruns are byte-identical)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=LOG_FIELDS, lineterminator="\n")
        writer.writeheader()
        for record in records:
            writer.writerow(asdict(record))


def read_log(path: str | Path) -> List[EpochRecord]:
    with open(path, newline="") as f:
        return [
            EpochRecord(
                int(r["epoch"]), r["split"], float(r["loss"]), float(r["lr"]), int(r["seed"])
            )
            for r in csv.DictReader(f)
        ]
