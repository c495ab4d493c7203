import logging
import os
from pathlib import Path
from typing import Union

import cv2
import numpy as np
from scipy import ndimage

from ..errors import DataError, ShapeError

logger = logging.getLogger(__name__)


def read_mask(path: Union[str, os.PathLike]) -> np.ndarray:
    """An 8-bit grayscale image as an HxW float32 map in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise DataError(f"Unreadable mask: {path}")
    return raw.astype(np.float32) / 255.0


def write_mask(path: Union[str, os.PathLike], mask: np.ndarray):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    pixels = np.round(np.clip(mask, 0.0, 1.0) * 255.0).astype(np.uint8)
    if not cv2.imwrite(str(path), pixels):
        raise DataError(f"Could not write mask: {path}")


def foreground_mask(
    person: np.ndarray, contour_interior: np.ndarray, feather_sigma: float = 1.0
) -> np.ndarray:
    """
    Union of the person segmentation and the salient-contour interior.
    The edge is feathered outwards only: every pixel of the union stays 1.
    """
    person = np.asarray(person)
    contour_interior = np.asarray(contour_interior)
    if person.shape != contour_interior.shape or person.ndim != 2:
        raise ShapeError(
            f"Masks must be two equal HxW maps, got {person.shape} and {contour_interior.shape}"
        )
    union = ((person > 0.5) | (contour_interior > 0.5)).astype(np.float32)
    if feather_sigma <= 0:
        return union
    soft = cv2.GaussianBlur(union, (0, 0), sigmaX=feather_sigma)
    return np.maximum(union, soft)


def salient_contour_interior(image: np.ndarray) -> np.ndarray:
    """
    Best-effort saliency reference: Otsu-thresholded gradient magnitude,
    holes filled, and the interior of its largest outer contour.
    """
    gray = cv2.cvtColor(np.asarray(image, dtype=np.float32), cv2.COLOR_RGB2GRAY)
    gx = cv2.Sobel(gray, cv2.CV_32F, 1, 0, ksize=3)
    gy = cv2.Sobel(gray, cv2.CV_32F, 0, 1, ksize=3)
    magnitude = cv2.magnitude(gx, gy)
    interior = np.zeros(gray.shape, dtype=np.float32)
    if magnitude.max() <= 0:
        return interior
    scaled = np.round(magnitude / magnitude.max() * 255.0).astype(np.uint8)
    _, edges = cv2.threshold(scaled, 0, 255, cv2.THRESH_BINARY | cv2.THRESH_OTSU)
    edges = cv2.morphologyEx(edges, cv2.MORPH_CLOSE, np.ones((3, 3), np.uint8))
    filled = ndimage.binary_fill_holes(edges > 0).astype(np.uint8)
    contours, _ = cv2.findContours(filled, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    if not contours:
        return interior
    largest = max(contours, key=cv2.contourArea)
    cv2.drawContours(interior, [largest], -1, 1.0, thickness=cv2.FILLED)
    return interior
