"""Static figures: loss curves, snapshot grids and hallucination sheets."""

import logging
from pathlib import Path
from typing import List, Sequence

import matplotlib
import numpy as np
import pandas as pd

from ..errors import DataError

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)

# no version string in the PNG header
PNG_METADATA = {"Software": None}

LOSS_COLUMNS = ["l_pixel", "l_pc", "l_adv", "l_id", "l_tv", "l_total"]


def read_metrics(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"No metrics file at {path}")
    try:
        return pd.read_csv(path)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot read {path}: {e}") from e


def plot_losses(metrics: pd.DataFrame, out_path) -> Path:
    """One panel per loss term, one line per resolution."""
    if metrics.empty:
        raise DataError("The metrics file has no rows yet.")
    fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex=True)
    for ax, column in zip(axes.ravel(), LOSS_COLUMNS):
        for resolution, rows in metrics.groupby("resolution"):
            ax.plot(rows["iteration"], rows[column], label=f"{resolution}px", linewidth=1)
        ax.set_title(column)
        ax.set_yscale("symlog", linthresh=1e-6)
    axes[0, 0].legend(fontsize="small")
    for ax in axes[1]:
        ax.set_xlabel("iteration")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=100, metadata=PNG_METADATA)
    plt.close(fig)
    return out_path


def image_grid(
    columns: Sequence[np.ndarray], titles: Sequence[str], out_path, row_titles=None
) -> Path:
    """
    `columns[j]` is an NxHxWx3 stack; the sheet has N rows and one column
    per stack.
    """
    rows = len(columns[0])
    fig, axes = plt.subplots(
        rows, len(columns), figsize=(1.6 * len(columns), 1.6 * rows), squeeze=False
    )
    for j, (stack, title) in enumerate(zip(columns, titles)):
        axes[0, j].set_title(title, fontsize="small")
        for i in range(rows):
            axes[i, j].imshow(np.clip(stack[i], 0.0, 1.0))
            axes[i, j].set_xticks([])
            axes[i, j].set_yticks([])
    if row_titles is not None:
        for i, title in enumerate(row_titles):
            axes[i, 0].set_ylabel(title, fontsize="small")
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=80, metadata=PNG_METADATA)
    plt.close(fig)
    return out_path


def comparison_sheet(inputs: np.ndarray, outputs: np.ndarray, out_path) -> Path:
    """Inputs on the top row, hallucinated images below."""
    return image_grid(
        [np.stack([a, b]) for a, b in zip(inputs, outputs)],
        [str(i) for i in range(len(inputs))],
        out_path,
        row_titles=["input", "output"],
    )


def snapshot_grid(
    originals: np.ndarray,
    masked: np.ndarray,
    snapshots: List[np.ndarray],
    epochs: List[int],
    out_path,
) -> Path:
    return image_grid(
        [originals, masked, *snapshots],
        ["original", "masked", *[f"{e} epochs" for e in epochs]],
        out_path,
    )
