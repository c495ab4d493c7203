from .layers import (
    LayerSpec,
    KINDS,
    ACTIVATIONS,
    pixel_shuffle,
    pixel_unshuffle,
    he_init,
    initialize,
    scale_channels,
    transfer_weights,
    ConvLayer,
    ResidualBlock,
    FullyConnected,
    PixelShuffle,
    SpecNetwork,
)
from .specs import (
    generator_specs,
    discriminator_specs,
    upscaler_specs,
    encoder_depth,
    discriminator_depth,
    check_resolution,
)
from .generator import GeneratorBlock, build_generator
from .discriminator import Discriminator, build_discriminator
from .upscaler import Upscaler2x, build_upscaler
from .cascade import Cascade
from .archive import write_archive, read_archive, FORMAT_VERSION
