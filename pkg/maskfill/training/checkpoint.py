import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import torch

from ..netblocks import Cascade, write_archive, read_archive
from ..errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_KIND = "checkpoint"


@dataclass
class Checkpoint:
    """
    Weights of every generator, upscaler and discriminator of a cascade
    plus the run metadata. `train_state` carries the optimizer moments,
    counters and the batch-order generator needed to resume exactly.
    """

    regime: str
    resolutions: Sequence[int]
    channel_scale: float
    state: Dict[str, torch.Tensor]
    epoch: int = 0
    iteration: int = 0
    stage: Optional[int] = None
    config_hash: str = ""
    train_state: Optional[Dict[str, Any]] = None
    path: Optional[Path] = field(default=None, compare=False)

    @classmethod
    def from_cascade(cls, cascade: Cascade, regime: str, **kwargs) -> "Checkpoint":
        state = {k: v.detach().clone() for k, v in cascade.state_dict().items()}
        return cls(regime, list(cascade.resolutions), cascade.channel_scale, state, **kwargs)

    @property
    def meta(self) -> Dict[str, Any]:
        return {
            "kind": CHECKPOINT_KIND,
            "regime": self.regime,
            "resolutions": list(self.resolutions),
            "channel_scale": self.channel_scale,
            "epoch": self.epoch,
            "iteration": self.iteration,
            "stage": self.stage,
            "config_hash": self.config_hash,
        }

    @property
    def top_resolution(self) -> int:
        return max(self.resolutions)

    def build_cascade(self) -> Cascade:
        with torch.device("meta"):
            cascade = Cascade(self.resolutions, self.channel_scale)
        try:
            cascade.load_state_dict(self.state, strict=True, assign=True)
        except RuntimeError as e:
            raise CheckpointError(f"Checkpoint does not fit its own cascade: {e}") from e
        return cascade.eval()


def save_checkpoint(path, checkpoint: Checkpoint) -> Path:
    extra = {}
    if checkpoint.train_state is not None:
        extra["train_state"] = checkpoint.train_state
    path = write_archive(path, checkpoint.meta, checkpoint.state, **extra)
    checkpoint.path = path
    logger.info("Saved checkpoint %s (epoch %d)", path, checkpoint.epoch)
    return path


def load_checkpoint(path) -> Checkpoint:
    payload = read_archive(path, kind=CHECKPOINT_KIND)
    meta = payload["meta"]
    try:
        return Checkpoint(
            regime=meta["regime"],
            resolutions=list(meta["resolutions"]),
            channel_scale=float(meta["channel_scale"]),
            state=payload["state"],
            epoch=int(meta["epoch"]),
            iteration=int(meta["iteration"]),
            stage=meta.get("stage"),
            config_hash=meta.get("config_hash", ""),
            train_state=payload.get("train_state"),
            path=Path(path),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"Incomplete checkpoint metadata in {path}: {e}") from e
