"""
Laplacian-pyramid compositing with OpenCV's 5-tap binomial pyrDown/pyrUp.

A pyramid of `levels` levels holds `levels - 1` band-pass images, finest
first, followed by the coarsest Gaussian level.
"""

import math
import logging
from typing import List, Optional

import cv2
import numpy as np

from .masks import foreground_mask
from ..errors import ConfigError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = 4


def max_levels(height: int, width: int) -> int:
    return int(math.floor(math.log2(min(height, width))))


def check_levels(levels: int, height: int, width: int):
    top = max_levels(height, width)
    if not isinstance(levels, int) or not 1 <= levels <= top:
        raise ConfigError(
            f"Pyramid depth for a {height}x{width} image must lie in [1, {top}], got {levels}"
        )


def _up(image: np.ndarray, like: np.ndarray) -> np.ndarray:
    return cv2.pyrUp(image, dstsize=(like.shape[1], like.shape[0]))


def gaussian_pyramid(image: np.ndarray, levels: int) -> List[np.ndarray]:
    pyramid = [np.asarray(image, dtype=np.float64)]
    for _ in range(levels - 1):
        pyramid.append(cv2.pyrDown(pyramid[-1]))
    return pyramid


def laplacian_pyramid(image: np.ndarray, levels: int) -> List[np.ndarray]:
    gaussian = gaussian_pyramid(image, levels)
    bands = [fine - _up(coarse, fine) for fine, coarse in zip(gaussian, gaussian[1:])]
    return bands + [gaussian[-1]]


def collapse(pyramid: List[np.ndarray]) -> np.ndarray:
    image = pyramid[-1]
    for band in reversed(pyramid[:-1]):
        image = _up(image, band) + band
    return image


def laplacian_blend(
    foreground: np.ndarray,
    background: np.ndarray,
    mask: np.ndarray,
    levels: int = DEFAULT_LEVELS,
) -> np.ndarray:
    """
    Composite `foreground` over `background` band by band, weighting each
    band with the matching Gaussian level of `mask` (1 keeps the
    foreground). Returns a float32 image clipped to [0, 1].
    """
    foreground = np.asarray(foreground, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if foreground.shape != background.shape:
        raise ShapeError(
            f"Foreground {foreground.shape} and background {background.shape} differ"
        )
    if mask.shape != foreground.shape[:2]:
        raise ShapeError(f"Mask {mask.shape} does not cover {foreground.shape}")
    check_levels(levels, *mask.shape)

    weights = gaussian_pyramid(mask, levels)
    blended = []
    for fg, bg, w in zip(
        laplacian_pyramid(foreground, levels), laplacian_pyramid(background, levels), weights
    ):
        if fg.ndim == 3:
            w = w[..., None]
        blended.append(bg + w * (fg - bg))
    return np.clip(collapse(blended), 0.0, 1.0).astype(np.float32)


def replace_background(
    image: np.ndarray,
    background: np.ndarray,
    person: np.ndarray,
    contour_interior: Optional[np.ndarray] = None,
    levels: int = DEFAULT_LEVELS,
    feather_sigma: float = 1.0,
) -> np.ndarray:
    if background.shape != image.shape:
        background = cv2.resize(
            np.asarray(background, dtype=np.float32),
            (image.shape[1], image.shape[0]),
            interpolation=cv2.INTER_LINEAR,
        )
    if contour_interior is None:
        contour_interior = np.zeros(person.shape, dtype=np.float32)
    mask = foreground_mask(person, contour_interior, feather_sigma)
    return laplacian_blend(image, background, mask, levels)
