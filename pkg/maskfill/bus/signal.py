from dataclasses import dataclass
from typing import ClassVar, Optional


@dataclass
class Signal:
    # Emitted once per batch and resolution; backends keep these quiet.
    per_iteration: ClassVar[bool] = False


@dataclass
class TrainingStarted(Signal):
    run_dir: str
    regime: str
    seed: int


@dataclass
class IterationCompleted(Signal):
    per_iteration: ClassVar[bool] = True

    iteration: int
    epoch: int
    resolution: int
    l_total: float


@dataclass
class EpochCompleted(Signal):
    epoch: int
    stage: Optional[int]
    iterations: int


@dataclass
class SnapshotSaved(Signal):
    path: str
    epoch: int


@dataclass
class StageCompleted(Signal):
    stage: int
    resolution: int
    parameter_count: int
    path: str


@dataclass
class TrainingDiverged(Signal):
    iteration: int
    resolution: int
    term: str
    path: str


@dataclass
class TrainingFinished(Signal):
    path: str
    iterations: int
    seconds: float


@dataclass
class SampleSkipped(Signal):
    """An input image was dropped by the data pipeline."""

    path: str
    reason: str
