"""
Frozen feature extractors behind the identity, perceptual and
recognition terms.

The shipped implementations are random-weight conv stacks: deterministic
given their seed, differentiable in their input and light enough for a
CPU. Weights of real backbones plug in through `load_extractor`, as long
as they are stored in the weight-archive format with a registered type.
"""

import math
import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Type, Union

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..netblocks import initialize, write_archive, read_archive
from ..errors import CheckpointError, ExtractorError, ShapeError

logger = logging.getLogger(__name__)

EXTRACTOR_KIND = "extractor"


class FrozenModule(nn.Module):
    """A module whose weights never train; gradients still reach its input."""

    def freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        return self.eval()

    def train(self, mode: bool = True):
        return super().train(False)


class FeatureExtractor(FrozenModule, ABC):
    """Maps an (N, 3, H, W) batch in [0, 1] to (N, dim) feature vectors."""

    input_size: int
    dim: int

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeError(f"Extractor expects (N, 3, H, W), got {tuple(images.shape)}")
        if tuple(images.shape[-2:]) != (self.input_size, self.input_size):
            images = F.interpolate(
                images,
                size=(self.input_size, self.input_size),
                mode="bilinear",
                align_corners=False,
            )
        return self.embed(images)

    @abstractmethod
    def embed(self, images: torch.Tensor) -> torch.Tensor:
        """Features of a batch already at `input_size`."""

    def params(self) -> Dict[str, Any]:
        return {}


class PerceptualMetric(FrozenModule, ABC):
    """Maps two (N, 3, H, W) batches to N nonnegative dissimilarities."""

    min_resolution: int

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        if a.shape != b.shape:
            raise ShapeError(f"Cannot compare {tuple(a.shape)} with {tuple(b.shape)}")
        if min(a.shape[-2:]) < self.min_resolution:
            raise ShapeError(
                f"Metric needs at least {self.min_resolution}px, got {tuple(a.shape)}"
            )
        return self.distance(a, b)

    @abstractmethod
    def distance(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        pass

    def params(self) -> Dict[str, Any]:
        return {}


def _conv_stack(channels: List[int]) -> nn.ModuleList:
    return nn.ModuleList(
        nn.Conv2d(c_in, c_out, 3, stride=2, padding=1)
        for c_in, c_out in zip(channels, channels[1:])
    )


class RandomConvExtractor(FeatureExtractor):
    """
    Stride-2 convs down to a 4x4 map, flattened into `dim` features.
    `dim` must be a multiple of 16.
    """

    def __init__(self, dim: int = 256, input_size: int = 64, width: int = 16, seed: int = 0):
        super().__init__()
        if dim % 16 or input_size < 8 or input_size & (input_size - 1):
            raise ExtractorError(
                f"Unsupported extractor shape: dim={dim}, input_size={input_size}"
            )
        self.dim = dim
        self.input_size = input_size
        self.width = width
        self.seed = seed
        depth = int(math.log2(input_size // 4))
        channels = [3] + [width * 2**i for i in range(depth - 1)] + [dim // 16]
        self.layers = _conv_stack(channels)
        initialize(self, torch.Generator().manual_seed(seed))
        self.freeze()

    def embed(self, images):
        h = (images - 0.5) * 2.0
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if i < len(self.layers) - 1:
                h = F.leaky_relu(h, 0.2)
        return h.flatten(1)

    def params(self):
        return {
            "dim": self.dim,
            "input_size": self.input_size,
            "width": self.width,
            "seed": self.seed,
        }


class RandomFeatureMetric(PerceptualMetric):
    """
    Distance between channel-normalized activations of a random conv
    stack: for every layer, the spatial mean of the squared difference of
    unit-length feature vectors, summed over layers.
    """

    def __init__(self, min_resolution: int = 32, width: int = 16, depth: int = 3, seed: int = 0):
        super().__init__()
        self.min_resolution = min_resolution
        self.width = width
        self.depth = depth
        self.seed = seed
        self.layers = _conv_stack([3] + [width * 2**i for i in range(depth)])
        initialize(self, torch.Generator().manual_seed(seed))
        self.freeze()

    def _features(self, x: torch.Tensor) -> List[torch.Tensor]:
        features = []
        h = (x - 0.5) * 2.0
        for layer in self.layers:
            h = F.leaky_relu(layer(h), 0.2)
            norm = torch.sqrt((h * h).sum(dim=1, keepdim=True) + 1e-10)
            features.append(h / norm)
        return features

    def distance(self, a, b):
        total = a.new_zeros(a.shape[0])
        for fa, fb in zip(self._features(a), self._features(b)):
            total = total + ((fa - fb) ** 2).sum(dim=1).mean(dim=(1, 2))
        return total

    def params(self):
        return {
            "min_resolution": self.min_resolution,
            "width": self.width,
            "depth": self.depth,
            "seed": self.seed,
        }


EXTRACTOR_TYPES: Dict[str, Type[nn.Module]] = {
    "random_conv": RandomConvExtractor,
    "random_feature_metric": RandomFeatureMetric,
}


def register_extractor(name: str, extractor_type: Type[nn.Module]):
    """Make a plug-in type loadable by `load_extractor`."""
    if not issubclass(extractor_type, (FeatureExtractor, PerceptualMetric)):
        raise TypeError("Plug-ins must derive from FeatureExtractor or PerceptualMetric.")
    EXTRACTOR_TYPES[name] = extractor_type


def _type_name(extractor: nn.Module) -> str:
    for name, extractor_type in EXTRACTOR_TYPES.items():
        if type(extractor) is extractor_type:
            return name
    raise ExtractorError(f"{type(extractor).__name__} is not a registered extractor type")


def save_extractor(path, extractor: Union[FeatureExtractor, PerceptualMetric]):
    meta = {"kind": EXTRACTOR_KIND, "type": _type_name(extractor), "params": extractor.params()}
    return write_archive(path, meta, extractor.state_dict())


def load_extractor(path) -> Union[FeatureExtractor, PerceptualMetric]:
    try:
        payload = read_archive(path, kind=EXTRACTOR_KIND)
    except CheckpointError as e:
        raise ExtractorError(f"Cannot load extractor: {e}") from e
    meta = payload["meta"]
    extractor_type = EXTRACTOR_TYPES.get(meta.get("type"))
    if extractor_type is None:
        raise ExtractorError(f"Unknown extractor type {meta.get('type')!r} in {path}")
    extractor = extractor_type(**meta.get("params", {}))
    try:
        extractor.load_state_dict(payload["state"])
    except RuntimeError as e:
        raise ExtractorError(f"Weights in {path} do not fit {meta['type']}: {e}") from e
    logger.info("Loaded %s extractor from %s", meta["type"], path)
    return extractor.freeze()


def default_extractors(config: Optional[Dict[str, Any]] = None) -> Dict[str, nn.Module]:
    """
    The identity extractor, perceptual metric and recognition extractor
    named by `config` (the EXTRACTORS section), or the built-in stand-ins.
    """
    config = config or {}
    defaults = {
        "identity": lambda: RandomConvExtractor(dim=512, input_size=64, seed=1),
        "perceptual": lambda: RandomFeatureMetric(seed=2),
        "recognition": lambda: RandomConvExtractor(dim=256, input_size=64, seed=3),
    }
    extractors = {}
    for role, make_default in defaults.items():
        path = config.get(role)
        extractors[role] = load_extractor(path) if path else make_default()
    return extractors
