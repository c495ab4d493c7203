import logging
from typing import Optional

import torch

from .layers import SpecNetwork, initialize
from .specs import upscaler_specs, UPSCALER_STAGES
from ..errors import ShapeError

logger = logging.getLogger(__name__)


class Upscaler2x(SpecNetwork):
    """
    Four conv + pixel-shuffle stages turning an (N, 3, H, W) image into
    (N, 3, 2H, 2W). Every stage but the last mixes its doubled output back
    down with a strided conv, so the chain nets one doubling.
    """

    def __init__(self):
        super().__init__(upscaler_specs())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeError(f"Upscaler expects (N, 3, H, W), got {tuple(x.shape)}")
        for stage in range(1, UPSCALER_STAGES + 1):
            x = self.layer(f"stages.{stage}.conv")(x)
            x = self.layer(f"stages.{stage}.shuffle")(x)
            if stage < UPSCALER_STAGES:
                x = self.layer(f"stages.{stage}.downmix")(x)
        return x.clamp(0.0, 1.0)

    def identity_(self) -> "Upscaler2x":
        """
        Set the weights so that the whole chain is a nearest-neighbour
        upsampling: every shuffle conv copies its pixel into the four
        sub-pixels, every downmix picks the top-left one back.
        """
        with torch.no_grad():
            for stage in range(1, UPSCALER_STAGES + 1):
                conv = self.layer(f"stages.{stage}.conv").conv
                conv.weight.zero_()
                conv.bias.zero_()
                for channel in range(3):
                    conv.weight[channel * 4 : channel * 4 + 4, channel, 1, 1] = 1.0
                if stage < UPSCALER_STAGES:
                    downmix = self.layer(f"stages.{stage}.downmix").conv
                    downmix.weight.zero_()
                    downmix.bias.zero_()
                    for channel in range(3):
                        downmix.weight[channel, channel, 1, 1] = 1.0
        return self


def build_upscaler(
    generator: Optional[torch.Generator] = None, identity: bool = False
) -> Upscaler2x:
    upscaler = initialize(Upscaler2x(), generator)
    if identity:
        upscaler.identity_()
    return upscaler
