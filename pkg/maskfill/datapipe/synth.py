"""
Procedural faces for running the whole pipeline without a dataset.

A subject fixes the face geometry and colors; the seed adds pose jitter,
skin texture and background noise on top.
"""

import logging
from typing import Optional, Tuple

import cv2
import numpy as np

from .types import LandmarkSet, FULL_RESOLUTION

logger = logging.getLogger(__name__)


def _ring(center, radii, count, start=0.0):
    angles = start + np.arange(count) * 2 * np.pi / count
    return np.stack(
        [center[0] + radii[0] * np.cos(angles), center[1] + radii[1] * np.sin(angles)],
        axis=1,
    )


def _landmark_template() -> np.ndarray:
    """68 points in face coordinates: x, y in [-1, 1], y pointing down."""
    jaw_angles = np.pi * (1 - np.arange(17) / 16)
    jaw = np.stack([np.cos(jaw_angles), 0.1 + 0.9 * np.sin(jaw_angles)], axis=1)
    brow_x = np.linspace(0.15, 0.75, 5)
    left_brow = np.stack([-brow_x[::-1], np.full(5, -0.42)], axis=1)
    right_brow = np.stack([brow_x, np.full(5, -0.42)], axis=1)
    bridge = np.stack([np.zeros(4), np.linspace(-0.25, 0.12, 4)], axis=1)
    nostrils = np.stack([np.linspace(-0.18, 0.18, 5), np.full(5, 0.2)], axis=1)
    left_eye = _ring((-0.45, -0.18), (0.16, 0.06), 6, start=np.pi)
    right_eye = _ring((0.45, -0.18), (0.16, 0.06), 6, start=np.pi)
    outer_mouth = _ring((0.0, 0.5), (0.32, 0.1), 12, start=np.pi)
    inner_mouth = _ring((0.0, 0.5), (0.2, 0.04), 8, start=np.pi)
    return np.concatenate(
        [jaw, left_brow, right_brow, bridge, nostrils, left_eye, right_eye,
         outer_mouth, inner_mouth]
    )


_TEMPLATE = _landmark_template()


def _color(rng: np.random.Generator, low, high) -> Tuple[float, float, float]:
    return tuple(float(v) for v in rng.uniform(low, high))


def synth_face(
    seed: int, subject: Optional[int] = None, size: int = FULL_RESOLUTION
) -> Tuple[np.ndarray, LandmarkSet]:
    """
    Render a deterministic `size`x`size` RGB face in [0, 1] with its 68
    landmarks. The same (seed, subject) always gives the same pixels.
    """
    subject = seed if subject is None else subject
    identity = np.random.default_rng([subject, 7919])
    rng = np.random.default_rng([seed, 104729])
    scale = size / FULL_RESOLUTION

    half_width = identity.uniform(40, 48) * scale
    half_height = half_width * identity.uniform(1.2, 1.35)
    skin = _color(identity, (0.55, 0.35, 0.25), (0.95, 0.8, 0.7))
    hair = _color(identity, (0.02, 0.02, 0.02), (0.5, 0.35, 0.25))
    clothes = _color(identity, (0.1, 0.1, 0.1), (0.9, 0.9, 0.9))
    lips = _color(identity, (0.5, 0.1, 0.1), (0.85, 0.35, 0.35))
    iris = _color(identity, (0.05, 0.05, 0.05), (0.35, 0.3, 0.25))

    center = np.array(
        [size / 2 + rng.uniform(-6, 6) * scale, size * 0.55 + rng.uniform(-5, 5) * scale]
    )
    angle = rng.uniform(-0.15, 0.15)
    rotation = np.array(
        [[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]]
    )

    def to_pixels(uv: np.ndarray) -> np.ndarray:
        return (uv * [half_width, half_height]) @ rotation.T + center

    top, bottom = _color(rng, (0.2, 0.2, 0.2), (0.9, 0.9, 0.9)), _color(
        rng, (0.1, 0.1, 0.1), (0.8, 0.8, 0.8)
    )
    ramp = np.linspace(0.0, 1.0, size, dtype=np.float32)[:, None, None]
    image = (1 - ramp) * np.array(top, np.float32) + ramp * np.array(bottom, np.float32)
    image = np.repeat(image, size, axis=1)
    image += rng.normal(0, 0.03, image.shape).astype(np.float32)
    image = np.ascontiguousarray(image, dtype=np.float32)

    degrees = float(np.degrees(angle))

    def ellipse(uv_center, uv_axes, color):
        c = to_pixels(np.array([uv_center]))[0]
        axes = (
            max(1, int(round(uv_axes[0] * half_width))),
            max(1, int(round(uv_axes[1] * half_height))),
        )
        cv2.ellipse(
            image, (int(round(c[0])), int(round(c[1]))), axes, degrees,
            0, 360, color, thickness=-1, lineType=cv2.LINE_8,
        )

    # clothes and neck
    shoulders = to_pixels(np.array([[0.0, 1.75]]))[0]
    cv2.ellipse(
        image, (int(round(shoulders[0])), int(round(shoulders[1]))),
        (int(round(2.2 * half_width)), int(round(0.9 * half_height))),
        degrees, 180, 360, clothes, thickness=-1,
    )
    ellipse((0.0, 1.05), (0.45, 0.45), skin)
    # hair behind the head
    ellipse((0.0, -0.3), (1.18, 0.95), hair)
    ellipse((0.0, 0.0), (1.0, 1.0), skin)

    # skin texture, confined to the face ellipse
    texture = cv2.GaussianBlur(
        rng.normal(0, 0.06, (size, size)).astype(np.float32), (0, 0), 2.0
    )
    face_region = np.zeros((size, size), np.float32)
    c = to_pixels(np.array([[0.0, 0.0]]))[0]
    cv2.ellipse(
        face_region, (int(round(c[0])), int(round(c[1]))),
        (int(round(half_width)), int(round(half_height))), degrees, 0, 360, 1.0, -1,
    )
    image += (texture * face_region)[..., None]

    ellipse((-0.45, -0.18), (0.14, 0.05), iris)
    ellipse((0.45, -0.18), (0.14, 0.05), iris)
    ellipse((0.0, 0.5), (0.3, 0.08), lips)
    ellipse((-0.45, -0.42), (0.3, 0.03), hair)
    ellipse((0.45, -0.42), (0.3, 0.03), hair)

    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    points = np.clip(to_pixels(_TEMPLATE), 0, size - 1)
    return image, LandmarkSet.from_points(points)
