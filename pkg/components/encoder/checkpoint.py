"""Checkpoints: a JSON manifest plus one raw float32 blob per tensor."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from core.atomic import atomic_directory
from core.exceptions import DimensionError, InputError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def _blob_name(tensor_name: str) -> str:
    return tensor_name.replace(".", "_") + ".f32"


def save_checkpoint(directory: Path, manifest: Dict[str, Any], tensors: Dict[str, np.ndarray]) -> Path:
    """Write tensors and manifest into ``directory``, replacing it atomically

    Args:
        directory: Checkpoint directory
        manifest: JSON-serializable metadata (layer specs, seed, step count)
        tensors: Named tensors, stored as little-endian float32

    Returns:
        Path of the written manifest
    """
    directory = Path(directory)
    entries = {}
    with atomic_directory(directory) as staging:
        for name in sorted(tensors):
            blob = _blob_name(name)
            np.ascontiguousarray(tensors[name], dtype="<f4").tofile(staging / blob)
            entries[name] = {"shape": list(tensors[name].shape), "dtype": "f32le", "path": blob}
        document = dict(manifest)
        document["tensors"] = entries
        (staging / MANIFEST_NAME).write_text(json.dumps(document, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Wrote checkpoint {directory} ({len(entries)} tensors)")
    return directory / MANIFEST_NAME


def load_checkpoint(directory: Path) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Read a checkpoint written by save_checkpoint

    Raises:
        InputError: If the manifest or a blob is missing
        DimensionError: If a blob does not match its recorded shape
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise InputError(f"no checkpoint manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"malformed checkpoint manifest {manifest_path}: {e}") from e

    tensors: Dict[str, np.ndarray] = {}
    for name, entry in manifest.get("tensors", {}).items():
        blob = directory / entry["path"]
        if not blob.is_file():
            raise InputError(f"checkpoint tensor {name} missing at {blob}")
        shape = tuple(entry["shape"])
        values = np.fromfile(blob, dtype="<f4")
        if values.size != int(np.prod(shape)):
            raise DimensionError(f"checkpoint tensor {name}: {values.size} values for shape {shape}")
        tensors[name] = values.reshape(shape).astype(np.float32)
    return manifest, tensors
