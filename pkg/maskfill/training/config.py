import json
import hashlib
import logging
from dataclasses import dataclass, field, asdict, fields
from typing import Any, Dict, Optional, Tuple

from ..config import DefaultConfig
from ..losses import LossWeights
from ..errors import ConfigError

logger = logging.getLogger(__name__)

REGIMES = ("cascaded", "progressive")


@dataclass(frozen=True)
class TrainConfig:
    """
    Everything that decides a training run. Built from the TRAIN section
    of the config; `seed` has no default and must be given.
    """

    seed: int
    regime: str = "cascaded"
    generator_lr: float = 1e-4
    discriminator_lr: float = 2e-4
    batch_size: int = 10
    epochs: int = 50
    iterations: Optional[int] = None
    snapshot_every: int = 10
    channel_scale: float = 1.0
    real_label: float = 0.9
    stop_gradient: bool = False
    use_l2_pixel: bool = False
    disable_adv: bool = False
    disable_id: bool = False
    disable_pc: bool = False
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    loss_weights: Dict[str, float] = field(
        default_factory=lambda: dict(DefaultConfig.TRAIN["loss_weights"])
    )

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        for name in ("generator_lr", "discriminator_lr", "channel_scale", "adam_eps"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("batch_size", "epochs", "snapshot_every"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if self.iterations is not None and (
            not isinstance(self.iterations, int) or self.iterations < 1
        ):
            raise ConfigError(f"iterations must be a positive integer, got {self.iterations!r}")
        if not 0.0 < self.real_label <= 1.0:
            raise ConfigError(f"real_label must lie in (0, 1], got {self.real_label}")
        betas = tuple(self.adam_betas)
        if len(betas) != 2 or not all(0.0 <= b < 1.0 for b in betas):
            raise ConfigError(f"adam_betas must be two values in [0, 1), got {betas}")
        object.__setattr__(self, "adam_betas", betas)
        # validates the weights as well
        self.weights

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown training options: {sorted(unknown)}")
        if data.get("seed") is None:
            raise ConfigError("A seed is required for every run.")
        weights = {**DefaultConfig.TRAIN["loss_weights"], **(data.get("loss_weights") or {})}
        try:
            return cls(**{**data, "loss_weights": weights})
        except TypeError as e:
            raise ConfigError(str(e)) from e

    @property
    def weights(self) -> LossWeights:
        try:
            return LossWeights.from_train_config(asdict(self))
        except TypeError as e:
            raise ConfigError(f"Bad loss_weights: {e}") from e

    def as_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["adam_betas"] = list(self.adam_betas)
        return data

    def config_hash(self) -> str:
        encoded = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(encoded).hexdigest()[:16]
