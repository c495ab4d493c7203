import logging
from dataclasses import dataclass, asdict
from typing import Dict, Optional, Union

import torch

from .extractors import FeatureExtractor, PerceptualMetric
from ..errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

Number = Union[float, torch.Tensor]


@dataclass(frozen=True)
class LossWeights:
    """Multipliers of the perceptual, adversarial, identity and TV terms."""

    perceptual: float = 1.0
    adversarial: float = 0.1
    identity: float = 10.0
    total_variation: float = 1e-6

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ConfigError(f"Loss weight {name} must be >= 0, got {value}")

    @classmethod
    def from_train_config(cls, config: Dict) -> "LossWeights":
        """Read `loss_weights` and zero the ones switched off by ablation flags."""
        weights = dict(config.get("loss_weights") or {})
        if config.get("disable_pc"):
            weights["perceptual"] = 0.0
        if config.get("disable_adv"):
            weights["adversarial"] = 0.0
        if config.get("disable_id"):
            weights["identity"] = 0.0
        return cls(**weights)


@dataclass
class LossTerms:
    """
    The per-resolution loss terms of one generator step. `perceptual` is
    None when the metric does not apply at this resolution.
    """

    pixel: Number
    perceptual: Optional[Number] = None
    adversarial: Number = 0.0
    identity: Number = 0.0
    total_variation: Number = 0.0

    def total(self, weights: LossWeights) -> Number:
        return total_loss(self, weights)

    def as_row(self) -> Dict[str, float]:
        def value(term):
            if term is None:
                return 0.0
            return float(term.detach()) if torch.is_tensor(term) else float(term)

        return {
            "l_pixel": value(self.pixel),
            "l_pc": value(self.perceptual),
            "l_adv": value(self.adversarial),
            "l_id": value(self.identity),
            "l_tv": value(self.total_variation),
        }


def _check_same_shape(a: torch.Tensor, b: torch.Tensor, what: str):
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shapes {tuple(a.shape)} and {tuple(b.shape)} differ")


def mask_compose(
    generated: torch.Tensor, masked_input: torch.Tensor, mask: torch.Tensor
) -> torch.Tensor:
    """
    Keep the input pixels inside the face mask and the generated ones
    outside. `mask` is (N, 1, H, W), (N, H, W) or (H, W).
    """
    _check_same_shape(generated, masked_input, "mask_compose")
    if mask.ndim == generated.ndim - 1:
        mask = mask.unsqueeze(-3)
    elif mask.ndim == 2:
        mask = mask.view(1, 1, *mask.shape)
    if mask.shape[-2:] != generated.shape[-2:]:
        raise ShapeError(
            f"mask {tuple(mask.shape)} does not cover {tuple(generated.shape)}"
        )
    return mask * masked_input + (1 - mask) * generated


def pixel_loss(gt: torch.Tensor, gen: torch.Tensor, l2: bool = False) -> torch.Tensor:
    """Mean absolute (or squared) difference over every batch, channel and pixel."""
    _check_same_shape(gt, gen, "pixel_loss")
    diff = gen - gt
    return (diff * diff).mean() if l2 else diff.abs().mean()


def perceptual_loss(
    gen: torch.Tensor, gt: torch.Tensor, metric: PerceptualMetric
) -> Optional[torch.Tensor]:
    """Batch mean of the metric, or None below its minimum resolution."""
    _check_same_shape(gt, gen, "perceptual_loss")
    if min(gen.shape[-2:]) < metric.min_resolution:
        return None
    return metric(gen, gt).mean()


def adversarial_loss_g(d_scores: torch.Tensor) -> torch.Tensor:
    return ((d_scores - 1.0) ** 2).mean()


def discriminator_real_loss(d_real: torch.Tensor, real_label: float = 0.9) -> torch.Tensor:
    return ((d_real - real_label) ** 2).mean()


def discriminator_fake_loss(d_fake: torch.Tensor) -> torch.Tensor:
    return (d_fake**2).mean()


def discriminator_loss(
    d_real: torch.Tensor, d_fake: torch.Tensor, real_label: float = 0.9
) -> torch.Tensor:
    """Least-squares objective with a smoothed real label."""
    if not 0.0 < real_label <= 1.0:
        raise ConfigError(f"real_label must lie in (0, 1], got {real_label}")
    return discriminator_real_loss(d_real, real_label) + discriminator_fake_loss(d_fake)


def identity_loss(
    gen: torch.Tensor, gt: torch.Tensor, extractor: FeatureExtractor
) -> torch.Tensor:
    _check_same_shape(gt, gen, "identity_loss")
    diff = extractor(gen) - extractor(gt)
    return (diff * diff).mean()


def tv_loss(gen: torch.Tensor) -> torch.Tensor:
    """
    Sum of squared forward differences along both image axes, over the
    valid pixel pairs and every channel; averaged over the batch when
    `gen` is (N, C, H, W).
    """
    if gen.ndim not in (3, 4):
        raise ShapeError(f"tv_loss expects (C, H, W) or (N, C, H, W), got {tuple(gen.shape)}")
    dy = gen[..., 1:, :] - gen[..., :-1, :]
    dx = gen[..., :, 1:] - gen[..., :, :-1]
    per_image = (dy**2).sum(dim=(-3, -2, -1)) + (dx**2).sum(dim=(-3, -2, -1))
    return per_image.mean() if gen.ndim == 4 else per_image


def total_loss(terms: LossTerms, weights: LossWeights) -> Number:
    total = terms.pixel
    if terms.perceptual is not None:
        total = total + weights.perceptual * terms.perceptual
    return (
        total
        + weights.adversarial * terms.adversarial
        + weights.identity * terms.identity
        + weights.total_variation * terms.total_variation
    )
