import logging
from typing import Dict, Union

import numpy as np
import torch

from .checkpoint import Checkpoint, load_checkpoint
from ..datapipe import FaceSample, PyramidBatch, build_pyramid, FULL_RESOLUTION
from ..losses import mask_compose
from ..netblocks import Cascade
from ..errors import ShapeError

logger = logging.getLogger(__name__)


def cascade_forward(
    cascade: Cascade, batch: Dict[int, tuple], stop_gradient: bool = False
) -> Dict[int, torch.Tensor]:
    """
    Run the blocks from the lowest resolution up. Every output is
    mask-composed; the composed output of one level, upscaled and composed
    with the next level's mask, is that level's input.
    """
    outputs: Dict[int, torch.Tensor] = {}
    previous = None
    for resolution in cascade.resolutions:
        masked, _, mask = batch[resolution]
        if previous is None:
            x = masked
        else:
            if stop_gradient:
                previous = previous.detach()
            upscaled = cascade.upscaler(resolution // 2)(previous)
            x = mask_compose(upscaled, masked, mask)
        generated = cascade.generator(resolution)(x)
        outputs[resolution] = mask_compose(generated, masked, mask)
        previous = outputs[resolution]
    return outputs


def hallucinate(
    model: Union[Cascade, Checkpoint, str],
    masked_input: np.ndarray,
    mask: np.ndarray,
) -> np.ndarray:
    """
    Fill in everything around the face. `masked_input` is a 128x128x3
    image (or a stack of them) in [0, 1] and `mask` the matching binary
    face mask; pixels inside the mask come back unchanged.
    """
    if isinstance(model, (str, bytes)) or hasattr(model, "__fspath__"):
        model = load_checkpoint(model)
    cascade = model.build_cascade() if isinstance(model, Checkpoint) else model
    if cascade.top_resolution != FULL_RESOLUTION:
        raise ShapeError(
            f"Hallucination needs a block_{FULL_RESOLUTION}, "
            f"this model stops at {cascade.top_resolution}"
        )

    single = masked_input.ndim == 3
    images = masked_input[None] if single else masked_input
    masks = mask[None] if single else mask
    expected = (FULL_RESOLUTION, FULL_RESOLUTION, 3)
    if images.shape[1:] != expected or masks.shape != images.shape[:3]:
        raise ShapeError(
            f"Expected {expected} inputs with matching masks, "
            f"got {images.shape} and {masks.shape}"
        )

    pyramids = [
        build_pyramid(FaceSample.from_mask(image, m)) for image, m in zip(images, masks)
    ]
    batch = PyramidBatch.collate(pyramids)
    was_training = cascade.training
    cascade.eval()
    try:
        with torch.no_grad():
            out = cascade_forward(cascade, batch)[cascade.top_resolution]
    finally:
        cascade.train(was_training)
    result = out.permute(0, 2, 3, 1).numpy().astype(np.float32)
    return result[0] if single else result
