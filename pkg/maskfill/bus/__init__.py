from typing import Optional

from .signal import (
    Signal,
    TrainingStarted,
    IterationCompleted,
    EpochCompleted,
    SnapshotSaved,
    StageCompleted,
    TrainingDiverged,
    TrainingFinished,
    SampleSkipped,
)
from .service import Bus, unoption
from .backends import (
    AbstractSavingBackend,
    NoOpBackend,
    LogFileBackend,
    DatabaseBackend,
    EmittedSignal,
    SlotCall,
    encode_field,
)

bus: Optional[Bus] = None

BACKENDS = {
    "none": NoOpBackend,
    "log": LogFileBackend,
    "db": DatabaseBackend,
}


def _create_saving_backend(config: object) -> AbstractSavingBackend:
    """The backend named by `config.SIGNALS["logging_backend"]`; none when unset."""
    signals = getattr(config, "SIGNALS", None) or {}
    name = signals.get("logging_backend") or "none"
    if name not in BACKENDS:
        raise NotImplementedError(
            "Unknown config option for signals logging: %s" % name
        )
    if name == "db":
        return DatabaseBackend(record_iterations=bool(signals.get("record_iterations")))
    return BACKENDS[name]()


def create_bus(config: object) -> Bus:
    """Replace the process-wide bus with one configured from `config`."""
    global bus
    bus = Bus(config=config, saving_backend=_create_saving_backend(config))
    bus.setup()
    return bus


def get_bus() -> Bus:
    """The process-wide bus; a quiet one is made on first use."""
    global bus
    if bus is None:
        bus = Bus()
    return bus
