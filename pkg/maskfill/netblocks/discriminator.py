import logging
from dataclasses import replace
from typing import Optional

import torch
import torch.nn as nn

from .layers import LayerSpec, SpecNetwork, build_layer, initialize
from .specs import discriminator_specs, check_resolution
from ..errors import ShapeError

logger = logging.getLogger(__name__)


class Discriminator(SpecNetwork):
    """
    A pooling-free, fully convolutional classifier scoring each image of
    a batch with one probability of being real.
    """

    def __init__(self, resolution: int, channel_scale: float = 1.0):
        check_resolution(resolution)
        super().__init__(discriminator_specs(resolution, channel_scale))
        self.resolution = resolution
        self.feature_names = [
            s.name for s in self.specs if s.name.startswith("features.")
        ]

    def build(self, spec: LayerSpec) -> nn.Module:
        if spec.name == "head":
            # sigmoid is applied after the spatial average, not per pixel
            return build_layer(replace(spec, activation="none"))
        return build_layer(spec)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = (3, self.resolution, self.resolution)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(
                f"Discriminator {self.resolution} got a {tuple(x.shape)} batch"
            )
        h = x
        for name in self.feature_names:
            h = self.layer(name)(h)
        return torch.sigmoid(self.layer("head")(h).mean(dim=(1, 2, 3)))


def build_discriminator(
    resolution: int,
    channel_scale: float = 1.0,
    generator: Optional[torch.Generator] = None,
) -> Discriminator:
    return initialize(Discriminator(resolution, channel_scale), generator)
