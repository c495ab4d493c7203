import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import torch

from ..datapipe import read_image, list_images, subject_of, to_tensor
from .scores import pool_template
from ..losses import FeatureExtractor
from ..errors import ExtractorError, DataError

logger = logging.getLogger(__name__)


@dataclass
class Embedding:
    vector: np.ndarray
    source: str = ""
    subject: str = ""


def extract_embeddings(
    images: np.ndarray, extractor: Optional[FeatureExtractor], batch_size: int = 32
) -> np.ndarray:
    """NxHxWx3 images in [0, 1] to an NxE float64 array."""
    if extractor is None:
        raise ExtractorError("No recognition extractor loaded.")
    images = np.asarray(images, dtype=np.float32)
    vectors = []
    extractor.eval()
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            batch = to_tensor(images[start : start + batch_size])
            vectors.append(extractor(batch).double().numpy())
    return np.concatenate(vectors) if vectors else np.zeros((0, 0))


def extract_embedding(
    image: np.ndarray,
    extractor: Optional[FeatureExtractor],
    source: str = "",
    subject: str = "",
) -> Embedding:
    vector = extract_embeddings(np.asarray(image)[None], extractor)[0]
    return Embedding(vector, source=source, subject=subject)


def path_key(path: Union[str, os.PathLike]) -> str:
    return hashlib.sha256(str(Path(path).resolve()).encode()).hexdigest()


class EmbeddingCache:
    """
    Embeddings of image files, stored in one `.npz` archive whose array
    names are hashes of the resolved image paths.
    """

    def __init__(self, path: Optional[Union[str, os.PathLike]] = None):
        self.path = Path(path) if path else None
        self._vectors: Dict[str, np.ndarray] = {}
        self._dirty = False
        if self.path is not None and self.path.exists():
            with np.load(self.path) as archive:
                self._vectors = {name: archive[name] for name in archive.files}
            logger.debug("Loaded %d cached embeddings", len(self._vectors))

    def __len__(self):
        return len(self._vectors)

    def __contains__(self, image_path) -> bool:
        return path_key(image_path) in self._vectors

    def get(self, image_path) -> Optional[np.ndarray]:
        return self._vectors.get(path_key(image_path))

    def put(self, image_path, vector: np.ndarray):
        self._vectors[path_key(image_path)] = np.asarray(vector, dtype=np.float64)
        self._dirty = True

    def save(self):
        if self.path is None or not self._dirty:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(self.path, **self._vectors)
        self._dirty = False


def embed_files(
    paths: Sequence[Path],
    extractor: Optional[FeatureExtractor],
    cache: Optional[EmbeddingCache] = None,
) -> List[np.ndarray]:
    cache = cache if cache is not None else EmbeddingCache()
    missing = [p for p in paths if p not in cache]
    if missing:
        images = np.stack([read_image(p) for p in missing])
        for p, vector in zip(missing, extract_embeddings(images, extractor)):
            cache.put(p, vector)
        cache.save()
    return [cache.get(p) for p in paths]


def embed_directory(
    root: Union[str, os.PathLike],
    extractor: Optional[FeatureExtractor],
    cache: Optional[EmbeddingCache] = None,
) -> List[Embedding]:
    """Embed every image under `root`; the subject is the first directory level."""
    root = Path(root)
    paths = list_images(root)
    if not paths:
        raise DataError(f"No images under {root}")
    vectors = embed_files(paths, extractor, cache)
    return [
        Embedding(vector, str(path), subject_of(path, root))
        for path, vector in zip(paths, vectors)
    ]


def embed_templates(
    root: Union[str, os.PathLike],
    extractor: Optional[FeatureExtractor],
    cache: Optional[EmbeddingCache] = None,
) -> List[Embedding]:
    """
    One pooled embedding per `<subject>/<template>/` directory, pooling
    the `<media>` sub-directories of a template (or its loose images as a
    single media group).
    """
    root = Path(root)
    templates = []
    for subject_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for template_dir in sorted(p for p in subject_dir.iterdir() if p.is_dir()):
            groups = {}
            for path in list_images(template_dir):
                relative = path.relative_to(template_dir)
                media = relative.parts[0] if len(relative.parts) > 1 else ""
                groups.setdefault(media, []).append(path)
            if not groups:
                continue
            media = [embed_files(paths, extractor, cache) for _, paths in sorted(groups.items())]
            templates.append(
                Embedding(pool_template(media), str(template_dir), subject_dir.name)
            )
    if not templates:
        raise DataError(f"No templates under {root}")
    return templates
