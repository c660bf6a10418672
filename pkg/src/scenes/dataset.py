"""Dataset persistence: NDJSON scene records, PPM rasters and a metadata file."""

import json
import logging
from pathlib import Path
from typing import Collection, Dict, List, Sequence, Tuple

from ..config_models import GenConfig
from ..errors import DatasetError, ValidationError
from .models import Entity, Relationship, Scene, Vocabulary
from .raster import rasterize_pixels, write_ppm

logger = logging.getLogger(__name__)

SCENES_FILE = "scenes.ndjson"
RASTER_DIR = "rasters"
META_FILE = "meta.json"


def scene_to_record(scene: Scene, vocabulary: Vocabulary) -> Dict:
    return {
        "id": scene.id,
        "width": scene.width,
        "height": scene.height,
        "seed": scene.rng_seed,
        "entities": [
            {"category": vocabulary.categories[e.category], "bbox": list(e.bbox)}
            for e in scene.entities
        ],
        "relationships": [
            {"s": r.subject_idx, "p": vocabulary.predicates[r.predicate], "o": r.object_idx}
            for r in scene.relationships
        ],
    }


def scene_from_record(record: Dict, vocabulary: Vocabulary) -> Scene:
    entities = tuple(
        Entity(vocabulary.category_id(e["category"]), tuple(int(v) for v in e["bbox"]))
        for e in record["entities"]
    )
    relationships = tuple(
        Relationship(int(r["s"]), vocabulary.predicate_id(r["p"]), int(r["o"]))
        for r in record["relationships"]
    )
    return Scene(
        str(record["id"]),
        int(record["width"]),
        int(record["height"]),
        entities,
        relationships,
        int(record["seed"]),
    )


def save_dataset(
    path: str | Path, scenes: Sequence[Scene], vocabulary: Vocabulary, rasters: bool = True
) -> Path:
    """Write one split: ``scenes.ndjson`` plus one PPM raster per scene id."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with open(path / SCENES_FILE, "w", encoding="utf-8") as f:
            for scene in scenes:
                f.write(json.dumps(scene_to_record(scene, vocabulary)) + "\n")
        if rasters:
            (path / RASTER_DIR).mkdir(exist_ok=True)
            for scene in scenes:
                image = rasterize_pixels(scene, vocabulary)
                write_ppm(path / RASTER_DIR / f"{scene.id}.ppm", image)
    except OSError as e:
        raise DatasetError(f"Cannot write dataset to {path}: {e}") from e
    logger.info("Wrote %d scenes to %s", len(scenes), path)
    return path


def load_dataset(path: str | Path, vocabulary: Vocabulary) -> List[Scene]:
    """Read the scenes of one split written by ``save_dataset``."""
    scenes_file = Path(path) / SCENES_FILE
    if not scenes_file.exists():
        raise DatasetError(f"No {SCENES_FILE} under {path}")
    scenes = []
    with open(scenes_file, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                scenes.append(scene_from_record(json.loads(line), vocabulary))
            except (KeyError, TypeError, ValueError, ValidationError) as e:
                raise DatasetError(f"{scenes_file}:{line_no}: malformed scene record ({e})") from e
    return scenes


def write_meta(
    root: str | Path, config: GenConfig, master_seed: int, sizes: Dict[str, int]
) -> None:
    meta = {
        "generation": config.model_dump(),
        "vocabulary": Vocabulary.from_config(config).to_dict(),
        "seed": master_seed,
        "splits": sizes,
    }
    Path(root).mkdir(parents=True, exist_ok=True)
    with open(Path(root) / META_FILE, "w", encoding="utf-8") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write("\n")


def read_meta(root: str | Path) -> Tuple[GenConfig, Vocabulary]:
    meta_file = Path(root) / META_FILE
    if not meta_file.exists():
        raise DatasetError(f"No {META_FILE} under {root}; was it written by `shiftlab generate`?")
    with open(meta_file, "r", encoding="utf-8") as f:
        meta = json.load(f)
    vocab = meta["vocabulary"]
    return GenConfig(**meta["generation"]), Vocabulary.from_lists(
        vocab["categories"], vocab["predicates"]
    )


def load_split(root: str | Path, split: str) -> Tuple[List[Scene], Vocabulary, GenConfig]:
    """Metadata plus the scenes of one split of a generated dataset directory."""
    config, vocabulary = read_meta(root)
    return load_dataset(Path(root) / split, vocabulary), vocabulary, config


def without_categories(scenes: Sequence[Scene], categories: Collection[int]) -> List[Scene]:
    """Drop every scene holding an instance of one of ``categories``."""
    held_out = set(categories)
    kept = [s for s in scenes if not any(e.category in held_out for e in s.entities)]
    if held_out:
        logger.info(
            "Held out %d of %d scenes containing categories %s",
            len(scenes) - len(kept),
            len(scenes),
            sorted(held_out),
        )
    return kept
