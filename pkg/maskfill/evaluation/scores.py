"""
Verification scoring: Pearson matching of embeddings, template pooling,
all-vs-all pairing and the ROC sweep with TPR at fixed FPR.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import roc_curve

from ..errors import ScoreUndefinedError

logger = logging.getLogger(__name__)

FPR_TARGETS = (0.001, 0.01, 0.1)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ScoreUndefinedError(
            f"Pearson needs two vectors of equal length >= 2, got {a.size} and {b.size}"
        )
    a = a - a.mean()
    b = b - b.mean()
    norm = np.sqrt((a * a).sum() * (b * b).sum())
    if norm == 0.0:
        raise ScoreUndefinedError("Pearson is undefined for a constant vector.")
    return float(np.clip((a * b).sum() / norm, -1.0, 1.0))


def pool_template(media: Sequence[Sequence[np.ndarray]]) -> np.ndarray:
    """Average within each media group, then across the groups."""
    groups = [np.asarray(group, dtype=np.float64) for group in media]
    if not groups or any(len(group) == 0 for group in groups):
        raise ScoreUndefinedError("Cannot pool an empty template.")
    return np.mean([group.mean(axis=0) for group in groups], axis=0)


def mean_correlation(set_a: Sequence[np.ndarray], set_b: Sequence[np.ndarray]) -> float:
    """
    Mean Pearson score over every (a, b) pair. When both arguments are the
    same object, an embedding is never paired with itself.
    """
    same = set_a is set_b
    if len(set_a) == 0 or len(set_b) == 0:
        raise ScoreUndefinedError("mean_correlation needs two nonempty sets.")
    scores = [
        pearson(a, b)
        for i, a in enumerate(set_a)
        for j, b in enumerate(set_b)
        if not (same and i == j)
    ]
    if not scores:
        raise ScoreUndefinedError("A single embedding has no pairs besides itself.")
    return float(np.mean(scores))


def all_vs_all_scores(
    embeddings: Sequence[np.ndarray], labels: Sequence[str]
) -> Tuple[np.ndarray, np.ndarray]:
    """Genuine and impostor scores over every unordered pair."""
    if len(embeddings) != len(labels):
        raise ScoreUndefinedError(
            f"{len(embeddings)} embeddings but {len(labels)} labels"
        )
    genuine, impostor = [], []
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            score = pearson(embeddings[i], embeddings[j])
            (genuine if labels[i] == labels[j] else impostor).append(score)
    return np.asarray(genuine), np.asarray(impostor)


@dataclass
class VerificationResult:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    tpr_at: Dict[float, float] = field(default_factory=dict)
    genuine_count: int = 0
    impostor_count: int = 0
    degenerate: bool = False

    def tpr_at_fpr(self, target: float) -> float:
        """Largest TPR among the sweep points whose FPR does not exceed `target`."""
        if self.degenerate:
            return 1.0
        allowed = self.fpr <= target + 1e-12
        return float(self.tpr[allowed].max()) if allowed.any() else 0.0

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"threshold": self.thresholds, "fpr": self.fpr, "tpr": self.tpr}
        )

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False)


def verification_roc(
    genuine_scores, impostor_scores, fpr_targets: Sequence[float] = FPR_TARGETS
) -> VerificationResult:
    genuine = np.asarray(genuine_scores, dtype=np.float64).ravel()
    impostor = np.asarray(impostor_scores, dtype=np.float64).ravel()
    if genuine.size == 0 or impostor.size == 0:
        raise ScoreUndefinedError(
            f"ROC needs genuine and impostor scores, got {genuine.size} and {impostor.size}"
        )
    labels = np.concatenate([np.ones(genuine.size), np.zeros(impostor.size)])
    scores = np.concatenate([genuine, impostor])
    fpr, tpr, thresholds = roc_curve(labels, scores, drop_intermediate=False)
    result = VerificationResult(
        fpr, tpr, thresholds, genuine_count=genuine.size, impostor_count=impostor.size
    )
    result.tpr_at = {f: result.tpr_at_fpr(f) for f in fpr_targets}
    return result


def verify(
    embeddings: Sequence[np.ndarray],
    labels: Sequence[str],
    fpr_targets: Sequence[float] = FPR_TARGETS,
) -> VerificationResult:
    """
    All-vs-all verification of one embedding set. Without impostor pairs
    the ROC is undefined; the result is then flagged degenerate and every
    TPR is reported as 1.0.
    """
    genuine, impostor = all_vs_all_scores(embeddings, labels)
    if genuine.size == 0:
        raise ScoreUndefinedError("No genuine pairs: every subject has a single image.")
    if impostor.size == 0:
        warnings.warn("No impostor pairs; TPR is reported as 1.0", stacklevel=2)
        logger.warning("Only one subject in the verification set, no impostor pairs")
        result = VerificationResult(
            np.array([0.0]),
            np.array([1.0]),
            np.array([np.inf]),
            genuine_count=genuine.size,
            degenerate=True,
        )
        result.tpr_at = {f: 1.0 for f in fpr_targets}
        return result
    return verification_roc(genuine, impostor, fpr_targets)
