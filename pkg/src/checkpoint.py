"""
Binary checkpoint container.

Layout: 8-byte magic, little-endian uint32 metadata length, UTF-8 JSON
metadata (sorted keys, lists every array's name and shape), then each array
as little-endian float32 in metadata order.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from .config import Config
from .errors import CheckpointError
from .models.base import ReferringModel
from .models.factory import MODEL_KINDS, create_model
from .scenes.models import Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"SSAS0001"
_LE_F32 = np.dtype("<f4")


def save_checkpoint(
    path: str | Path,
    model: ReferringModel,
    config: Config,
    vocabulary: Vocabulary,
    seed: int,
    epoch: int = 0,
    metrics: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write every parameter and extra array of ``model`` plus a self-describing header."""
    path = Path(path)
    arrays = model.state_arrays()
    names = sorted(arrays)
    metadata = {
        "kind": model.kind,
        "config": config.snapshot(),
        "vocabulary": vocabulary.to_dict(),
        "seed": seed,
        "epoch": epoch,
        "metrics": metrics or {},
        "arrays": [{"name": n, "shape": list(arrays[n].shape)} for n in names],
    }
    header = json.dumps(metadata, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for name in names:
            f.write(np.ascontiguousarray(arrays[name], dtype=_LE_F32).tobytes())
    logger.info("Saved %s checkpoint with %d arrays to %s", model.kind, len(names), path)
    return path


def read_checkpoint(path: str | Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Return (metadata, arrays) from a checkpoint file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(blob) < offset + 4:
        raise CheckpointError(f"{path} is truncated")
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    try:
        metadata = json.loads(blob[offset : offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path} has a corrupt metadata block") from e
    offset += header_len

    arrays: Dict[str, np.ndarray] = {}
    for entry in metadata.get("arrays", []):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        nbytes = count * _LE_F32.itemsize
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path} is truncated inside array {entry['name']}")
        data = np.frombuffer(blob, dtype=_LE_F32, count=count, offset=offset)
        arrays[entry["name"]] = data.reshape(shape).astype(np.float32)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path} has {len(blob) - offset} trailing bytes")
    return metadata, arrays


def load_model(
    path: str | Path, expected_kind: Optional[str] = None
) -> Tuple[ReferringModel, Dict[str, Any], Vocabulary, Config]:
    """Rebuild a model from its embedded config snapshot and load its arrays."""
    metadata, arrays = read_checkpoint(path)
    kind = metadata.get("kind")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"{path} holds unknown model kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise CheckpointError(f"{path} holds a {kind} model, expected {expected_kind}")
    config = Config.from_dict(metadata["config"])
    vocabulary = Vocabulary.from_lists(**metadata["vocabulary"])
    model = create_model(kind, vocabulary, config, metadata.get("seed", 0))
    model.load_state_arrays(arrays)
    return model, metadata, vocabulary, config
