"""
The run directory of one training process:

    <run>/config.json           effective configuration
    <run>/metrics.csv           one row per iteration and resolution
    <run>/timings.csv           wall-clock seconds per iteration
    <run>/snapshots/epoch_NN.ckpt
    <run>/stages/stage_K_R.ckpt progressive regime only
    <run>/checkpoint.ckpt       final weights
    <run>/preview.npz           the first training samples, for snapshot grids
    <run>/run.lock              present while a process owns the run
"""

import os
import csv
import json
import copy
import logging
from concurrent.futures import Future, ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from ..bus import get_bus, SnapshotSaved
from ..datapipe import ImagePyramid, FULL_RESOLUTION
from ..errors import CheckpointError, DataError, RunLockedError

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "iteration",
    "epoch",
    "stage",
    "resolution",
    "l_pixel",
    "l_pc",
    "l_adv",
    "l_id",
    "l_tv",
    "l_total",
    "d_loss",
]
TIMINGS_COLUMNS = ["iteration", "seconds"]
PREVIEW_ROWS = 4


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class CsvLog:
    """Append-only CSV file with a fixed header."""

    def __init__(self, path: Path, columns: List[str]):
        self.path = path
        self.columns = columns
        new = not path.exists() or path.stat().st_size == 0
        self._file = open(path, "a", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file)
        if new:
            self._writer.writerow(columns)

    def write(self, row: Dict[str, Any]):
        self._writer.writerow([_format(row.get(c)) for c in self.columns])

    def flush(self):
        self._file.flush()

    def close(self):
        self._file.close()


class RunDirectory:
    def __init__(self, path):
        self.path = Path(path)
        self._locked = False
        self.metrics: Optional[CsvLog] = None
        self.timings: Optional[CsvLog] = None

    @property
    def lock_path(self) -> Path:
        return self.path / "run.lock"

    @property
    def config_path(self) -> Path:
        return self.path / "config.json"

    @property
    def metrics_path(self) -> Path:
        return self.path / "metrics.csv"

    @property
    def timings_path(self) -> Path:
        return self.path / "timings.csv"

    @property
    def checkpoint_path(self) -> Path:
        return self.path / "checkpoint.ckpt"

    @property
    def preview_path(self) -> Path:
        return self.path / "preview.npz"

    def snapshot_path(self, epoch: int) -> Path:
        return self.path / "snapshots" / f"epoch_{epoch:02d}.ckpt"

    def stage_path(self, stage: int, resolution: int) -> Path:
        return self.path / "stages" / f"stage_{stage}_{resolution}.ckpt"

    def snapshots(self) -> List[Path]:
        return sorted((self.path / "snapshots").glob("epoch_*.ckpt"))

    def acquire(self):
        self.path.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLockedError(
                f"{self.path} is in use by another process "
                f"(remove {self.lock_path} if it is stale)"
            ) from None
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._locked = True
        self.metrics = CsvLog(self.metrics_path, METRICS_COLUMNS)
        self.timings = CsvLog(self.timings_path, TIMINGS_COLUMNS)

    def release(self):
        for log in (self.metrics, self.timings):
            if log is not None:
                log.close()
        self.metrics = self.timings = None
        if self._locked:
            self.lock_path.unlink(missing_ok=True)
            self._locked = False

    def __enter__(self) -> "RunDirectory":
        self.acquire()
        return self

    def __exit__(self, *exc_info):
        self.release()

    def write_config(self, config: Dict[str, Any]):
        with open(self.config_path, "w", encoding="utf-8") as f:
            json.dump(config, f, indent=2, sort_keys=True)

    def write_preview(self, pyramids: Sequence[ImagePyramid], rows: int = PREVIEW_ROWS):
        """Keep the full-resolution ground truth, masked input and mask of the first `rows` samples."""
        samples = [p[FULL_RESOLUTION] for p in pyramids[:rows]]
        np.savez_compressed(
            self.preview_path,
            ground_truth=np.stack([s.ground_truth for s in samples]),
            masked=np.stack([s.masked for s in samples]),
            mask=np.stack([s.mask for s in samples]),
        )

    def read_preview(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.preview_path.exists():
            raise DataError(f"No preview samples at {self.preview_path}")
        with np.load(self.preview_path) as preview:
            return preview["ground_truth"], preview["masked"], preview["mask"]


class SnapshotWriter:
    """
    Writes epoch snapshots on a worker thread. The caller hands over a
    copy of the state, so training continues while the file is written;
    `drain` reports finished writes on the bus from the calling thread.
    """

    def __init__(self, max_workers: int = 1):
        self._executor = ThreadPoolExecutor(
            max_workers=max_workers, thread_name_prefix="snapshot"
        )
        self._pending: List[Tuple[int, Future]] = []

    def submit(self, path: Path, checkpoint: Checkpoint) -> Future:
        checkpoint = copy.copy(checkpoint)
        checkpoint.train_state = copy.deepcopy(checkpoint.train_state)
        future = self._executor.submit(save_checkpoint, path, checkpoint)
        self._pending.append((checkpoint.epoch, future))
        return future

    def drain(self, wait: bool = False) -> List[Path]:
        written = []
        still_pending = []
        for epoch, future in self._pending:
            if not (wait or future.done()):
                still_pending.append((epoch, future))
                continue
            try:
                path = future.result()
            except Exception as e:
                raise CheckpointError(f"Snapshot of epoch {epoch} failed: {e}") from e
            get_bus().emit(SnapshotSaved(path=str(path), epoch=epoch))
            written.append(path)
        self._pending = still_pending
        return written

    def close(self):
        try:
            self.drain(wait=True)
        finally:
            self._executor.shutdown(wait=True)
