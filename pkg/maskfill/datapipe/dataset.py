import os
import json
import hashlib
import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Union

import cv2
import numpy as np
import torch

from .types import FaceSample, ImagePyramid, LandmarkSet, RESOLUTIONS
from .align import align_face
from .mask import compute_face_mask
from .pyramid import build_pyramid, augment_mirror
from ..bus import get_bus, SampleSkipped
from ..errors import DataError, EmptyDatasetError, LandmarkError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
LANDMARK_SUFFIXES = (".json", ".txt", ".pts")
ARCHIVE_VERSION = 1

LandmarkSource = Union[str, os.PathLike, Callable[[Path, np.ndarray], LandmarkSet]]


def read_image(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read an 8-bit image file as HxWx3 RGB float32 in [0, 1]."""
    raw = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if raw is None:
        raise DataError(f"Unreadable image: {path}")
    return cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def write_image(path: Union[str, os.PathLike], image: np.ndarray) -> None:
    """Write an HxWx3 RGB (or HxW gray) float image in [0, 1] as 8-bit."""
    pixels = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    if pixels.ndim == 3:
        pixels = cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), pixels):
        raise DataError(f"Could not write image: {path}")


def read_landmarks(path: Union[str, os.PathLike]) -> LandmarkSet:
    """
    Read a landmark file. JSON files hold `points` (68 [x, y] pairs) and
    optionally `eye_centers` (2 pairs); text files hold 68 "x y" rows
    followed by 2 eye-center rows. Missing eye centers are derived from the
    eye contours.
    """
    path = Path(path)
    try:
        if path.suffix == ".json":
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            points = np.asarray(data["points"], dtype=np.float64)
            eyes = data.get("eye_centers")
        else:
            rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
            points, eyes = rows[:68], rows[68:70] if len(rows) >= 70 else None
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise LandmarkError(f"Invalid landmark file {path}: {e}") from e
    if eyes is None or len(eyes) == 0:
        return LandmarkSet.from_points(points)
    return LandmarkSet(points, np.asarray(eyes, dtype=np.float64))


def write_landmarks(path: Union[str, os.PathLike], landmarks: LandmarkSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "points": landmarks.points.tolist(),
                "eye_centers": landmarks.eye_centers.tolist(),
            },
            f,
        )


def subject_of(path: Path, root: Path) -> str:
    """Images in `root/<subject>/...` belong to <subject>; flat files to their stem."""
    relative = path.relative_to(root)
    if len(relative.parts) > 1:
        return relative.parts[0]
    return path.stem.split("__")[0]


def list_images(root: Union[str, os.PathLike]) -> List[Path]:
    root = Path(root)
    return sorted(
        p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def find_landmark_file(image_path: Path, root: Path, landmark_dir: Path) -> Optional[Path]:
    relative = image_path.relative_to(root).with_suffix("")
    for suffix in LANDMARK_SUFFIXES:
        candidate = landmark_dir / relative.with_suffix(suffix)
        if candidate.exists():
            return candidate
    return None


def _skip(path: Path, reason: str) -> None:
    logger.warning("Skipping %s: %s", path, reason)
    get_bus().emit(SampleSkipped(path=str(path), reason=reason))


def preprocess(
    image: np.ndarray, landmarks: LandmarkSet, subject_id: str = ""
) -> FaceSample:
    """Align, then mask: the full-resolution training sample."""
    aligned, aligned_landmarks = align_face(image, landmarks)
    return compute_face_mask(aligned, aligned_landmarks, subject_id)


def load_dataset(
    root_path: Union[str, os.PathLike],
    landmark_source: LandmarkSource,
    mirror: bool = False,
) -> Iterator[FaceSample]:
    """
    Yield aligned and masked samples for every image under `root_path`.

    `landmark_source` is either a directory mirroring the image tree with
    one landmark file per image, or a callable `(path, image) -> LandmarkSet`
    standing in for a detector. Images without usable landmarks are skipped
    with a warning.
    """
    root = Path(root_path)
    images = list_images(root)
    if not images:
        raise EmptyDatasetError(f"No images found under {root}")

    produced = 0
    for image_path in images:
        try:
            image = read_image(image_path)
        except DataError as e:
            _skip(image_path, str(e))
            continue
        try:
            if callable(landmark_source):
                landmarks = landmark_source(image_path, image)
            else:
                landmark_file = find_landmark_file(
                    image_path, root, Path(landmark_source)
                )
                if landmark_file is None:
                    _skip(image_path, "no landmark file")
                    continue
                landmarks = read_landmarks(landmark_file)
            sample = preprocess(image, landmarks, subject_of(image_path, root))
        except DataError as e:
            _skip(image_path, str(e))
            continue
        produced += 1
        yield sample
        if mirror:
            produced += 1
            yield augment_mirror(sample)

    if produced == 0:
        raise EmptyDatasetError(f"No usable samples under {root}")
    logger.info("Loaded %d samples from %s", produced, root)


def save_archive(path: Union[str, os.PathLike], pyramids: List[ImagePyramid]) -> None:
    """Stack the pyramids level by level into one `.npz` file."""
    if not pyramids:
        raise EmptyDatasetError("Nothing to save.")
    arrays: Dict[str, np.ndarray] = {
        "format_version": np.array(ARCHIVE_VERSION),
        "subject_ids": np.array([p.subject_id for p in pyramids]),
    }
    for r in RESOLUTIONS:
        arrays[f"ground_truth_{r}"] = np.stack([p[r].ground_truth for p in pyramids])
        arrays[f"mask_{r}"] = np.stack([p[r].mask for p in pyramids])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(path, **arrays)
    logger.info("Saved %d pyramids to %s", len(pyramids), path)


def load_archive(path: Union[str, os.PathLike]) -> List[ImagePyramid]:
    try:
        with np.load(path, allow_pickle=False) as data:
            version = int(data["format_version"])
            if version != ARCHIVE_VERSION:
                raise DataError(
                    f"Archive {path} has format {version}, expected {ARCHIVE_VERSION}"
                )
            subjects = [str(s) for s in data["subject_ids"]]
            levels = {
                r: (data[f"ground_truth_{r}"], data[f"mask_{r}"]) for r in RESOLUTIONS
            }
    except (OSError, KeyError, ValueError) as e:
        raise DataError(f"Cannot read sample archive {path}: {e}") from e
    return [
        ImagePyramid(
            {
                r: FaceSample.from_mask(gt[i], mask[i], subjects[i])
                for r, (gt, mask) in levels.items()
            }
        )
        for i in range(len(subjects))
    ]


def archive_digest(path: Union[str, os.PathLike]) -> str:
    """SHA-256 over array names and contents, independent of zip metadata."""
    digest = hashlib.sha256()
    with np.load(path, allow_pickle=False) as data:
        for name in sorted(data.files):
            array = data[name]
            digest.update(name.encode())
            digest.update(str(array.dtype).encode())
            digest.update(str(array.shape).encode())
            digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()


def to_tensor(images: np.ndarray) -> torch.Tensor:
    """NxHxWxC (or NxHxW) arrays to NxCxHxW float tensors."""
    tensor = torch.from_numpy(np.ascontiguousarray(images))
    if tensor.ndim == 3:
        return tensor.unsqueeze(1)
    return tensor.permute(0, 3, 1, 2).contiguous()


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """A CxHxW tensor back to an HxWxC array."""
    return tensor.detach().cpu().permute(1, 2, 0).numpy()


class PyramidBatch(dict):
    """resolution -> (masked, ground_truth, mask) tensors, NCHW."""

    @classmethod
    def collate(cls, pyramids: Iterable[ImagePyramid], dtype=torch.float32):
        pyramids = list(pyramids)
        batch = cls()
        for r in RESOLUTIONS:
            masked = to_tensor(np.stack([p[r].masked for p in pyramids])).to(dtype)
            gt = to_tensor(np.stack([p[r].ground_truth for p in pyramids])).to(dtype)
            mask = to_tensor(np.stack([p[r].mask for p in pyramids])).to(dtype)
            batch[r] = (masked, gt, mask)
        return batch


def iterate_batches(
    pyramids: List[ImagePyramid], batch_size: int, generator: torch.Generator
) -> Iterator[PyramidBatch]:
    """One epoch of shuffled mini-batches; the last one may be smaller."""
    order = torch.randperm(len(pyramids), generator=generator).tolist()
    for start in range(0, len(order), batch_size):
        yield PyramidBatch.collate(pyramids[i] for i in order[start : start + batch_size])
