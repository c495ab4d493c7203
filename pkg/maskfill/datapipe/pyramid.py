import logging

import cv2
import numpy as np

from .types import FaceSample, ImagePyramid, RESOLUTIONS, FULL_RESOLUTION
from ..errors import DataError

logger = logging.getLogger(__name__)

MASK_THRESHOLD = 0.5


def downsample(image: np.ndarray) -> np.ndarray:
    """Halve both sides; with INTER_LINEAR each output pixel is a 2x2 mean."""
    height, width = image.shape[:2]
    return cv2.resize(
        image, (width // 2, height // 2), interpolation=cv2.INTER_LINEAR
    )


def build_pyramid(sample: FaceSample) -> ImagePyramid:
    """
    Successive 2x bilinear reductions from 128 down to 8. The mask is
    reduced the same way and re-binarized; the masked image of every level
    is recomposed from its own ground truth and mask.
    """
    if sample.ground_truth.shape[:2] != (FULL_RESOLUTION, FULL_RESOLUTION):
        raise DataError(
            f"Pyramids start at {FULL_RESOLUTION}px, got {sample.ground_truth.shape}"
        )
    levels = {FULL_RESOLUTION: sample}
    gt, mask = sample.ground_truth, sample.mask
    for resolution in sorted(RESOLUTIONS, reverse=True)[1:]:
        gt = np.clip(downsample(gt), 0.0, 1.0)
        mask = (downsample(mask) >= MASK_THRESHOLD).astype(np.float32)
        levels[resolution] = FaceSample.from_mask(gt, mask, sample.subject_id)
    return ImagePyramid(levels)


def augment_mirror(sample: FaceSample) -> FaceSample:
    """Horizontal flip of all the fields."""
    return FaceSample(
        np.ascontiguousarray(sample.ground_truth[:, ::-1]),
        np.ascontiguousarray(sample.masked[:, ::-1]),
        np.ascontiguousarray(sample.mask[:, ::-1]),
        sample.subject_id,
    )
