import math
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ShapeError

logger = logging.getLogger(__name__)

KINDS = ("conv", "atrous_conv", "residual_block", "fully_connected", "pixel_shuffle")

ACTIVATIONS: Dict[str, Callable[[torch.Tensor], torch.Tensor]] = {
    "leaky_relu(0.1)": lambda x: F.leaky_relu(x, 0.1),
    "leaky_relu(0.2)": lambda x: F.leaky_relu(x, 0.2),
    "tanh": torch.tanh,
    "sigmoid": torch.sigmoid,
    "none": lambda x: x,
}


@dataclass(frozen=True)
class LayerSpec:
    """
    One row of an architecture table.

    `name` is the dotted module path the layer gets inside its network,
    `kernel` is the side of the square filter and `upscale` is the
    pixel-shuffle factor (1 for every other kind).
    """

    name: str
    kind: str
    kernel: int
    stride: int
    dilation: int
    in_channels: int
    out_channels: int
    activation: str = "none"
    batch_norm: bool = False
    upscale: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShapeError(f"{self.name}: unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"{self.name}: unknown activation {self.activation!r}")
        if self.stride < 1 or self.dilation < 1 or self.kernel < 1:
            raise ShapeError(f"{self.name}: kernel, stride and dilation must be >= 1")
        if self.out_channels < 1 or self.in_channels < 1:
            raise ShapeError(f"{self.name}: channel counts must be >= 1")
        if self.kind == "pixel_shuffle" and (
            self.in_channels != self.out_channels * self.upscale**2
        ):
            raise ShapeError(
                f"{self.name}: {self.in_channels} channels do not shuffle "
                f"into {self.out_channels} by {self.upscale}"
            )

    @property
    def parameter_count(self) -> int:
        if self.kind in ("conv", "atrous_conv"):
            weights = self.kernel**2 * self.in_channels * self.out_channels
            # batch norm replaces the conv bias with its own scale and shift
            extra = 2 * self.out_channels if self.batch_norm else self.out_channels
            return weights + extra
        if self.kind == "residual_block":
            return 2 * (self.kernel**2 * self.out_channels**2 + self.out_channels)
        if self.kind == "fully_connected":
            return self.in_channels * self.out_channels + self.out_channels
        return 0


def activation(name: str) -> Callable[[torch.Tensor], torch.Tensor]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ShapeError(f"Unknown activation {name!r}") from None


def scale_channels(channels: int, channel_scale: float) -> int:
    return max(1, int(round(channels * channel_scale)))


def pixel_shuffle(feature: torch.Tensor, r: int) -> torch.Tensor:
    """
    Rearrange an (N, r*r*C, H, W) feature into (N, C, r*H, r*W):
    out[c, y, x] = in[c*r*r + (y % r)*r + (x % r), y // r, x // r].
    """
    if r < 1:
        raise ShapeError(f"Shuffle factor must be >= 1, got {r}")
    if feature.ndim < 3 or feature.shape[-3] % (r * r) != 0:
        raise ShapeError(
            f"Cannot pixel-shuffle {tuple(feature.shape)} by {r}: "
            f"channels must be divisible by {r * r}"
        )
    return F.pixel_shuffle(feature, r)


def pixel_unshuffle(feature: torch.Tensor, r: int) -> torch.Tensor:
    """The inverse rearrangement of `pixel_shuffle`."""
    if r < 1:
        raise ShapeError(f"Shuffle factor must be >= 1, got {r}")
    if feature.ndim < 3 or feature.shape[-1] % r or feature.shape[-2] % r:
        raise ShapeError(f"Cannot pixel-unshuffle {tuple(feature.shape)} by {r}")
    return F.pixel_unshuffle(feature, r)


def he_init(
    fan_in: int,
    shape,
    generator: Optional[torch.Generator] = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Zero-mean normal weights with variance 2/fan_in."""
    if fan_in < 1:
        raise ShapeError(f"fan_in must be >= 1, got {fan_in}")
    return torch.randn(shape, generator=generator, dtype=dtype) * math.sqrt(
        2.0 / fan_in
    )


def initialize(module: nn.Module, generator: Optional[torch.Generator] = None):
    """He-initialize every conv and linear weight of `module`, zero the biases."""
    with torch.no_grad():
        for layer in module.modules():
            if not isinstance(layer, (nn.Conv2d, nn.Linear)):
                continue
            if layer.weight.is_meta:
                continue
            fan_in = layer.weight[0].numel()
            layer.weight.copy_(
                he_init(fan_in, layer.weight.shape, generator, layer.weight.dtype)
            )
            if layer.bias is not None:
                layer.bias.zero_()
    return module


class ConvLayer(nn.Module):
    def __init__(self, spec: LayerSpec):
        super().__init__()
        self.conv = nn.Conv2d(
            spec.in_channels,
            spec.out_channels,
            spec.kernel,
            stride=spec.stride,
            padding=spec.dilation * (spec.kernel - 1) // 2,
            dilation=spec.dilation,
            bias=not spec.batch_norm,
        )
        self.norm = nn.BatchNorm2d(spec.out_channels) if spec.batch_norm else None
        self.activation = activation(spec.activation)

    def forward(self, x):
        x = self.conv(x)
        if self.norm is not None:
            x = self.norm(x)
        return self.activation(x)


class ResidualBlock(nn.Module):
    """Two 3x3 convs around an identity shortcut, no normalization."""

    def __init__(self, spec: LayerSpec):
        super().__init__()
        channels = spec.out_channels
        padding = spec.kernel // 2
        self.conv1 = nn.Conv2d(channels, channels, spec.kernel, padding=padding)
        self.conv2 = nn.Conv2d(channels, channels, spec.kernel, padding=padding)
        self.activation = activation(spec.activation)

    def forward(self, x):
        return x + self.conv2(self.activation(self.conv1(x)))


class FullyConnected(nn.Module):
    def __init__(self, spec: LayerSpec):
        super().__init__()
        self.linear = nn.Linear(spec.in_channels, spec.out_channels)
        self.activation = activation(spec.activation)

    def forward(self, x):
        return self.activation(self.linear(x))


class PixelShuffle(nn.Module):
    def __init__(self, spec: LayerSpec):
        super().__init__()
        self.factor = spec.upscale

    def forward(self, x):
        return pixel_shuffle(x, self.factor)


LAYER_TYPES = {
    "conv": ConvLayer,
    "atrous_conv": ConvLayer,
    "residual_block": ResidualBlock,
    "fully_connected": FullyConnected,
    "pixel_shuffle": PixelShuffle,
}


def build_layer(spec: LayerSpec) -> nn.Module:
    return LAYER_TYPES[spec.kind](spec)


class SpecNetwork(nn.Module):
    """
    A network assembled from a flat list of layer specs. The dotted name
    of each spec is the module path of its layer, so `state_dict` keys
    read like the architecture table.
    """

    def __init__(self, specs: Iterable[LayerSpec]):
        super().__init__()
        self.specs: List[LayerSpec] = list(specs)
        for spec in self.specs:
            self._place(spec.name, self.build(spec))

    def build(self, spec: LayerSpec) -> nn.Module:
        return build_layer(spec)

    def _place(self, name: str, layer: nn.Module):
        *path, leaf = name.split(".")
        parent: nn.Module = self
        for part in path:
            if part not in parent._modules:
                parent.add_module(part, nn.ModuleDict())
            parent = parent._modules[part]
        parent.add_module(leaf, layer)

    def layer(self, name: str) -> nn.Module:
        return self.get_submodule(name)

    def has_layer(self, name: str) -> bool:
        return any(spec.name == name for spec in self.specs)

    @property
    def parameter_count(self) -> int:
        return sum(spec.parameter_count for spec in self.specs)


def transfer_weights(source: nn.Module, target: nn.Module) -> List[str]:
    """
    Copy every parameter and buffer of `source` whose name and shape also
    exist in `target`. Returns the names copied.
    """
    source_state = source.state_dict()
    target_state = target.state_dict()
    copied = []
    with torch.no_grad():
        for name, value in target_state.items():
            other = source_state.get(name)
            if other is not None and other.shape == value.shape:
                value.copy_(other)
                copied.append(name)
    logger.debug(
        "Transferred %d of %d tensors", len(copied), len(target_state)
    )
    return copied
