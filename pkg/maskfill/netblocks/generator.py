import logging
from typing import Dict, Optional

import torch

from .layers import SpecNetwork, initialize
from .specs import generator_specs, encoder_depth, BOTTLENECK_SIZE
from ..errors import ShapeError

logger = logging.getLogger(__name__)


class GeneratorBlock(SpecNetwork):
    """
    Encoder, fully-connected bottleneck and pixel-shuffle decoder for one
    resolution. Takes a masked (N, 3, R, R) batch in [0, 1] and returns an
    image batch of the same shape, also in [0, 1].
    """

    def __init__(self, resolution: int, channel_scale: float = 1.0):
        super().__init__(generator_specs(resolution, channel_scale))
        self.resolution = resolution
        self.channel_scale = channel_scale
        self.depth = encoder_depth(resolution)
        fc2 = next(s for s in self.specs if s.name == "bottleneck.fc2")
        self.bottleneck_channels = fc2.out_channels // BOTTLENECK_SIZE**2

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = (3, self.resolution, self.resolution)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(
                f"block_{self.resolution} expects (N, {', '.join(map(str, expected))}), "
                f"got {tuple(x.shape)}"
            )
        h = self.layer("encoder.input")(x)
        activations: Dict[int, torch.Tensor] = {self.depth + 1: h}
        for stage in range(self.depth, 0, -1):
            h = self.layer(f"encoder.stages.{stage}.conv")(h)
            h = self.layer(f"encoder.stages.{stage}.residual")(h)
            activations[stage] = h

        h = self.layer("bottleneck.fc1")(h.flatten(1))
        h = self.layer("bottleneck.fc2")(h)
        h = h.view(-1, self.bottleneck_channels, BOTTLENECK_SIZE, BOTTLENECK_SIZE)

        for stage in range(1, self.depth + 1):
            prefix = f"decoder.stages.{stage}"
            h = self.layer(f"{prefix}.shuffle")(self.layer(f"{prefix}.conv")(h))
            if self.has_layer(f"{prefix}.fuse"):
                h = self.layer(f"{prefix}.fuse")(
                    torch.cat([h, activations[stage + 1]], dim=1)
                )
        return (self.layer("decoder.output")(h) + 1.0) / 2.0


def build_generator(
    resolution: int,
    channel_scale: float = 1.0,
    generator: Optional[torch.Generator] = None,
) -> GeneratorBlock:
    block = GeneratorBlock(resolution, channel_scale)
    initialize(block, generator)
    logger.debug(
        "Built block_%d with %d parameters", resolution, block.parameter_count
    )
    return block
