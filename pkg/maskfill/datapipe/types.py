from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, Tuple

import numpy as np

from ..errors import LandmarkError, DataError

logger = logging.getLogger(__name__)

RESOLUTIONS: Tuple[int, ...] = (8, 16, 32, 64, 128)
FULL_RESOLUTION = 128
N_LANDMARKS = 68

# 68-point layout: indices of the two eye contours.
LEFT_EYE = slice(36, 42)
RIGHT_EYE = slice(42, 48)


@dataclass(frozen=True)
class LandmarkSet:
    """68 facial keypoints and the two eye centers, in pixel (x, y)."""

    points: np.ndarray
    eye_centers: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        eyes = np.asarray(self.eye_centers, dtype=np.float64)
        if points.shape != (N_LANDMARKS, 2):
            raise LandmarkError(
                f"Expected {N_LANDMARKS}x2 landmark points, got {points.shape}"
            )
        if eyes.shape != (2, 2):
            raise LandmarkError(f"Expected 2x2 eye centers, got {eyes.shape}")
        if not (np.isfinite(points).all() and np.isfinite(eyes).all()):
            raise LandmarkError("Landmark coordinates must be finite.")
        if np.array_equal(eyes[0], eyes[1]):
            raise LandmarkError("Eye centers coincide.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "eye_centers", eyes)

    @classmethod
    def from_points(cls, points) -> LandmarkSet:
        """Derive eye centers as the means of the two eye contours."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape != (N_LANDMARKS, 2):
            raise LandmarkError(
                f"Expected {N_LANDMARKS}x2 landmark points, got {points.shape}"
            )
        eyes = np.stack([points[LEFT_EYE].mean(0), points[RIGHT_EYE].mean(0)])
        return cls(points, eyes)

    def transform(self, matrix: np.ndarray) -> LandmarkSet:
        """Apply a 2x3 affine matrix to every coordinate."""
        a, t = matrix[:, :2], matrix[:, 2]
        return LandmarkSet(self.points @ a.T + t, self.eye_centers @ a.T + t)

    def within(self, width: int, height: int) -> bool:
        coords = np.concatenate([self.points, self.eye_centers])
        return bool(
            (coords[:, 0] >= 0).all()
            and (coords[:, 0] <= width).all()
            and (coords[:, 1] >= 0).all()
            and (coords[:, 1] <= height).all()
        )


@dataclass(frozen=True)
class FaceSample:
    """
    A ground-truth image, its face mask and the masked input at one
    resolution. Images are HxWx3 float32 in [0, 1], the mask is HxW float32
    holding 0 and 1 only.
    """

    ground_truth: np.ndarray
    masked: np.ndarray
    mask: np.ndarray
    subject_id: str = ""

    def __post_init__(self):
        gt, masked, mask = self.ground_truth, self.masked, self.mask
        if gt.ndim != 3 or gt.shape[2] != 3:
            raise DataError(f"ground_truth must be HxWx3, got {gt.shape}")
        if masked.shape != gt.shape:
            raise DataError(
                f"masked {masked.shape} and ground_truth {gt.shape} differ"
            )
        if mask.shape != gt.shape[:2]:
            raise DataError(f"mask {mask.shape} does not match {gt.shape[:2]}")
        if gt.min(initial=0.0) < 0.0 or gt.max(initial=0.0) > 1.0:
            raise DataError("ground_truth pixels must lie in [0, 1]")
        if not np.isin(mask, (0.0, 1.0)).all():
            raise DataError("mask must be binary")
        if not np.array_equal(masked, gt * mask[..., None]):
            raise DataError("masked must equal ground_truth inside the mask and 0 outside")

    @property
    def resolution(self) -> int:
        return self.ground_truth.shape[0]

    @classmethod
    def from_mask(
        cls, ground_truth: np.ndarray, mask: np.ndarray, subject_id: str = ""
    ) -> FaceSample:
        ground_truth = np.ascontiguousarray(ground_truth, dtype=np.float32)
        mask = np.ascontiguousarray(mask, dtype=np.float32)
        return cls(ground_truth, ground_truth * mask[..., None], mask, subject_id)


@dataclass(frozen=True)
class ImagePyramid:
    levels: Dict[int, FaceSample] = field(default_factory=dict)

    def __post_init__(self):
        missing = [r for r in RESOLUTIONS if r not in self.levels]
        if missing:
            raise DataError(f"Pyramid lacks levels {missing}")
        for resolution, sample in self.levels.items():
            if sample.ground_truth.shape[:2] != (resolution, resolution):
                raise DataError(
                    f"Level {resolution} holds a {sample.ground_truth.shape} image"
                )

    def __getitem__(self, resolution: int) -> FaceSample:
        return self.levels[resolution]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.levels))

    @property
    def subject_id(self) -> str:
        return self.levels[FULL_RESOLUTION].subject_id
