import logging
from typing import Iterator, Optional, Sequence

import torch
import torch.nn as nn

from .generator import GeneratorBlock, build_generator
from .discriminator import Discriminator, build_discriminator
from .upscaler import Upscaler2x, build_upscaler
from .specs import check_resolution
from ..datapipe import RESOLUTIONS
from ..errors import ShapeError

logger = logging.getLogger(__name__)


class Cascade(nn.Module):
    """
    The weight container of a run: one generator block and one
    discriminator per trained resolution, plus an upscaler between every
    two consecutive resolutions.

    A progressive stage holds a single resolution and no upscalers.
    """

    def __init__(
        self,
        resolutions: Sequence[int] = RESOLUTIONS,
        channel_scale: float = 1.0,
        generator: Optional[torch.Generator] = None,
    ):
        super().__init__()
        self.resolutions = tuple(sorted(resolutions))
        for r in self.resolutions:
            check_resolution(r)
        for low, high in zip(self.resolutions, self.resolutions[1:]):
            if high != 2 * low:
                raise ShapeError(f"Cascade levels must double: {self.resolutions}")
        self.channel_scale = channel_scale
        self.generators = nn.ModuleDict(
            {str(r): build_generator(r, channel_scale, generator) for r in self.resolutions}
        )
        self.upscalers = nn.ModuleDict(
            {str(r): build_upscaler(generator) for r in self.resolutions[:-1]}
        )
        self.discriminators = nn.ModuleDict(
            {
                str(r): build_discriminator(r, channel_scale, generator)
                for r in self.resolutions
            }
        )

    def generator(self, resolution: int) -> GeneratorBlock:
        return self.generators[str(resolution)]

    def upscaler(self, resolution: int) -> Upscaler2x:
        """The upscaler taking `resolution` to twice its size."""
        return self.upscalers[str(resolution)]

    def discriminator(self, resolution: int) -> Discriminator:
        return self.discriminators[str(resolution)]

    def generator_parameters(self) -> Iterator[nn.Parameter]:
        yield from self.generators.parameters()
        yield from self.upscalers.parameters()

    def discriminator_parameters(self) -> Iterator[nn.Parameter]:
        yield from self.discriminators.parameters()

    @property
    def top_resolution(self) -> int:
        return self.resolutions[-1]

    def generator_parameter_count(self) -> int:
        return sum(p.numel() for p in self.generator_parameters())
