"""
The weight-archive format shared by checkpoints, snapshots and extractor
plug-ins: a `torch.save`d dict

    {"format_version": int, "meta": {...}, "state": {name: tensor}, **extra}

where `meta` holds only JSON-like values and `state` is a flat
state_dict whose keys name the block, resolution and layer.
"""

import os
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

import torch

from ..errors import CheckpointError, CheckpointVersionError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, os.PathLike]


def write_archive(
    path: PathLike,
    meta: Dict[str, Any],
    state: Dict[str, torch.Tensor],
    **extra: Any,
) -> Path:
    """Write through a temporary file so that readers never see half an archive."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"format_version": FORMAT_VERSION, "meta": meta, "state": state, **extra}
    partial = path.with_name(path.name + ".partial")
    torch.save(payload, partial)
    os.replace(partial, path)
    logger.debug("Wrote archive %s", path)
    return path


def read_archive(path: PathLike, kind: Optional[str] = None) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"No such archive: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as e:
        raise CheckpointError(f"Corrupt archive {path}: {e}") from e
    if not isinstance(payload, dict) or not {"format_version", "meta", "state"} <= set(
        payload
    ):
        raise CheckpointError(f"{path} is not a maskfill archive.")
    if payload["format_version"] != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"{path} has format {payload['format_version']}, "
            f"this version reads {FORMAT_VERSION}"
        )
    if kind is not None and payload["meta"].get("kind") != kind:
        raise CheckpointError(
            f"{path} holds a {payload['meta'].get('kind')!r}, expected {kind!r}"
        )
    return payload
