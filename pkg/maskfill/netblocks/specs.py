"""
Architecture tables for the generator blocks, the discriminators and the
inter-block upscalers, as flat lists of `LayerSpec`.

Generator layers are keyed by their distance from the 4x4 bottleneck:
`encoder.stages.1` is the last encoder stage (producing 4x4) and
`decoder.stages.1` the first decoder stage (producing 8x8), whatever the
block resolution. Blocks of neighbouring resolutions thus share the
names of their common layers.
"""

import logging
from typing import Dict, List, Tuple

from .layers import LayerSpec, scale_channels
from ..datapipe import RESOLUTIONS
from ..errors import ShapeError

logger = logging.getLogger(__name__)

# Output channels of the strided encoder convs, outermost first.
ENCODER_LADDERS: Dict[int, Tuple[int, ...]] = {
    8: (1024,),
    16: (512, 1024),
    32: (256, 512, 1024),
    64: (128, 256, 512, 1024),
    128: (64, 128, 256, 512, 1024),
}
INPUT_CHANNELS = 128
BOTTLENECK_SIZE = 4
BOTTLENECK_CHANNELS = 1024
FC1_UNITS = 512
# Channels after each decoder pixel shuffle, from the bottleneck outwards.
DECODER_CHANNELS = (512, 256, 128, 64, 64)
HIDDEN = "leaky_relu(0.1)"

CASIA_CHANNELS = (32, 64, 64, 128, 96, 192, 128, 256, 160, 320)
# Convs which followed a max-pool in the classifier; they downsample instead.
CASIA_STRIDED = (2, 4, 6, 8)
DISCRIMINATOR_HIDDEN = "leaky_relu(0.2)"

UPSCALER_STAGES = 4


def check_resolution(resolution: int) -> None:
    if resolution not in RESOLUTIONS:
        raise ShapeError(
            f"Resolution must be one of {RESOLUTIONS}, got {resolution}"
        )


def encoder_depth(resolution: int) -> int:
    check_resolution(resolution)
    return len(ENCODER_LADDERS[resolution])


def generator_specs(resolution: int, channel_scale: float = 1.0) -> List[LayerSpec]:
    check_resolution(resolution)

    def ch(channels):
        return scale_channels(channels, channel_scale)

    depth = encoder_depth(resolution)
    specs = [
        LayerSpec("encoder.input", "atrous_conv", 3, 1, 2, 3, ch(INPUT_CHANNELS), HIDDEN)
    ]
    # encoder activation channels by distance from the bottleneck;
    # the input conv sits one step beyond the outermost stage
    encoder_channels = {depth + 1: ch(INPUT_CHANNELS)}
    channels = ch(INPUT_CHANNELS)
    for stage, out in zip(range(depth, 0, -1), ENCODER_LADDERS[resolution]):
        out = ch(out)
        specs.append(
            LayerSpec(f"encoder.stages.{stage}.conv", "conv", 3, 2, 1, channels, out, HIDDEN)
        )
        specs.append(
            LayerSpec(
                f"encoder.stages.{stage}.residual", "residual_block", 3, 1, 1, out, out, HIDDEN
            )
        )
        encoder_channels[stage] = out
        channels = out

    depth_channels = ch(BOTTLENECK_CHANNELS)
    flat = BOTTLENECK_SIZE**2 * depth_channels
    specs.append(
        LayerSpec("bottleneck.fc1", "fully_connected", 1, 1, 1, flat, ch(FC1_UNITS), HIDDEN)
    )
    specs.append(
        LayerSpec("bottleneck.fc2", "fully_connected", 1, 1, 1, ch(FC1_UNITS), flat, HIDDEN)
    )

    channels = depth_channels
    for stage in range(1, depth + 1):
        out = ch(DECODER_CHANNELS[stage - 1])
        specs.append(
            LayerSpec(f"decoder.stages.{stage}.conv", "conv", 3, 1, 1, channels, 4 * out, HIDDEN)
        )
        specs.append(
            LayerSpec(
                f"decoder.stages.{stage}.shuffle", "pixel_shuffle", 1, 1, 1, 4 * out, out,
                upscale=2,
            )
        )
        if encoder_channels.get(stage + 1) == out:
            specs.append(
                LayerSpec(f"decoder.stages.{stage}.fuse", "conv", 1, 1, 1, 2 * out, out, HIDDEN)
            )
        channels = out
    specs.append(LayerSpec("decoder.output", "conv", 5, 1, 1, channels, 3, "tanh"))
    return specs


def discriminator_depth(resolution: int) -> int:
    """Number of downsampling convs kept so that the last map is at least 2x2."""
    check_resolution(resolution)
    return min(len(CASIA_STRIDED), resolution.bit_length() - 2)


def discriminator_specs(resolution: int, channel_scale: float = 1.0) -> List[LayerSpec]:
    count = 2 + 2 * discriminator_depth(resolution)
    specs = []
    channels = 3
    for index, out in enumerate(CASIA_CHANNELS[:count]):
        out = scale_channels(out, channel_scale)
        specs.append(
            LayerSpec(
                f"features.{index}",
                "conv",
                3,
                2 if index in CASIA_STRIDED else 1,
                1,
                channels,
                out,
                DISCRIMINATOR_HIDDEN,
                batch_norm=index > 0,
            )
        )
        channels = out
    specs.append(LayerSpec("head", "conv", 3, 1, 1, channels, 1, "sigmoid"))
    return specs


def upscaler_specs() -> List[LayerSpec]:
    specs = []
    for stage in range(1, UPSCALER_STAGES + 1):
        specs.append(LayerSpec(f"stages.{stage}.conv", "conv", 3, 1, 1, 3, 12))
        specs.append(
            LayerSpec(f"stages.{stage}.shuffle", "pixel_shuffle", 1, 1, 1, 12, 3, upscale=2)
        )
        if stage < UPSCALER_STAGES:
            specs.append(
                LayerSpec(f"stages.{stage}.downmix", "conv", 3, 2, 1, 3, 3, HIDDEN)
            )
    return specs
