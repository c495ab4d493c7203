import logging

import cv2
import numpy as np

from .types import FaceSample, LandmarkSet
from ..errors import EmptyHullError

logger = logging.getLogger(__name__)


def hull_mask(points: np.ndarray, height: int, width: int) -> np.ndarray:
    """Rasterize the filled convex hull of `points` into an HxW 0/1 map."""
    hull = cv2.convexHull(np.round(points).astype(np.int32))
    if cv2.contourArea(hull) <= 0:
        raise EmptyHullError("Landmark hull has zero area.")
    mask = np.zeros((height, width), dtype=np.uint8)
    cv2.fillConvexPoly(mask, hull, 1)
    if not mask.any():
        raise EmptyHullError("Landmark hull lies outside the frame.")
    return mask.astype(np.float32)


def compute_face_mask(
    aligned: np.ndarray, landmarks: LandmarkSet, subject_id: str = ""
) -> FaceSample:
    """Keep the pixels inside the landmark hull, zero everything else."""
    height, width = aligned.shape[:2]
    mask = hull_mask(landmarks.points, height, width)
    return FaceSample.from_mask(aligned, mask, subject_id)
