import logging
from typing import Tuple

import cv2
import numpy as np

from .types import LandmarkSet, FULL_RESOLUTION
from ..errors import AlignmentError, LandmarkError

logger = logging.getLogger(__name__)

# Eye centers land here, as fractions of the output frame (x, y).
CANONICAL_EYES = np.array([[0.3, 0.4], [0.7, 0.4]])


def canonical_eyes(size: int = FULL_RESOLUTION) -> np.ndarray:
    return CANONICAL_EYES * size


def similarity_transform(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """
    The 2x3 rotation+scale+translation matrix taking the two `src`
    points exactly onto the two `dst` points.
    """
    src_vec = src[1] - src[0]
    dst_vec = dst[1] - dst[0]
    src_len = np.hypot(*src_vec)
    if src_len == 0:
        raise AlignmentError("Eye centers coincide; cannot align.")
    scale = np.hypot(*dst_vec) / src_len
    angle = np.arctan2(dst_vec[1], dst_vec[0]) - np.arctan2(src_vec[1], src_vec[0])
    cos, sin = scale * np.cos(angle), scale * np.sin(angle)
    a = np.array([[cos, -sin], [sin, cos]])
    t = dst[0] - a @ src[0]
    return np.hstack([a, t[:, None]])


def align_face(
    image: np.ndarray, landmarks: LandmarkSet, size: int = FULL_RESOLUTION
) -> Tuple[np.ndarray, LandmarkSet]:
    """
    Rotate, scale and shift `image` so that the eye centers sit on a
    horizontal line at the canonical positions of a `size`x`size` frame.
    Pixels coming from outside the source are black.
    """
    height, width = image.shape[:2]
    if not landmarks.within(width, height):
        raise LandmarkError("Landmarks fall outside the image.")
    matrix = similarity_transform(landmarks.eye_centers, canonical_eyes(size))
    aligned = cv2.warpAffine(
        np.ascontiguousarray(image, dtype=np.float32),
        matrix,
        (size, size),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=(0, 0, 0),
    )
    aligned = np.clip(aligned, 0.0, 1.0)
    logger.debug("Aligned %sx%s image with matrix %s", width, height, matrix.tolist())
    return aligned, landmarks.transform(matrix)
