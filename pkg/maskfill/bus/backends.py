"""
Where training events end up besides the slots: nowhere, the log, or the
database. Every recorded emission is tagged with the run it belongs to,
taken from the last `TrainingStarted` the backend has seen.
"""
import math
import uuid
import json
import logging
from enum import Enum
from pathlib import PurePath
from dataclasses import fields
from abc import ABC, abstractmethod
from typing import List, Callable, Optional, Any, Dict
from datetime import datetime, timezone

import numpy as np
from sqlalchemy.orm import Mapped, mapped_column
from sqlalchemy.types import Integer, JSON
from sqlalchemy.ext.mutable import MutableDict, MutableList

from .signal import Signal, TrainingStarted
from ..db import db, Model, dttm_utc, JsonValue

logger = logging.getLogger(__name__)


def encode_field(value) -> JsonValue:
    """
    Make a signal field JSON-safe. Numpy scalars become Python numbers,
    paths become strings and non-finite floats become their names, since
    neither `json` nor the JSON column accept NaN.
    """
    if isinstance(value, Enum):
        return value.name
    if isinstance(value, PurePath):
        return str(value)
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [encode_field(v) for v in value]
    return value


def signal_fields(signal: Signal) -> Dict[str, JsonValue]:
    return {f.name: encode_field(getattr(signal, f.name)) for f in fields(signal)}


def slot_name(slot: Callable) -> str:
    return getattr(slot, "__qualname__", None) or getattr(slot, "__name__", None) or repr(slot)


class EmittedSignal(Model):
    __tablename__ = "emitted_signals"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    ts: Mapped[dttm_utc]
    run_dir: Mapped[Optional[str]]
    signal_type: Mapped[str]
    signal_fields = mapped_column(MutableDict.as_mutable(JSON))
    slots = mapped_column(MutableList.as_mutable(JSON))


class SlotCall(Model):
    __tablename__ = "slot_calls"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)
    emitted_signal_id: Mapped[int]
    slot_name: Mapped[str]
    status: Mapped[str]
    started_at: Mapped[dttm_utc]
    duration_ms: Mapped[int]
    error_message: Mapped[Optional[str]]


class AbstractSavingBackend(ABC):
    """
    Records training events and the slots that reacted to them.

    `log_signal_emitted` returns an id which the bus hands back to
    `log_slot_execution` for every slot called for that emission; None
    means "not recorded" and the slot calls are dropped too.
    """

    run_dir: Optional[str] = None

    def track_run(self, signal: Signal):
        if isinstance(signal, TrainingStarted):
            self.run_dir = signal.run_dir

    @abstractmethod
    def log_signal_emitted(self, signal: Signal, slots: List[Callable]) -> Any:
        pass

    @abstractmethod
    def log_slot_execution(
        self,
        emitted_signal_id: Any,
        slot: Callable,
        status: str,
        duration_ms: float,
        error_message: Optional[str] = None,
    ):
        pass


class NoOpBackend(AbstractSavingBackend):
    """Records nothing. Used when `SIGNALS.logging_backend` is "none"."""

    def log_signal_emitted(self, signal: Signal, slots: List[Callable]) -> None:
        return None

    def log_slot_execution(self, emitted_signal_id, slot, status, duration_ms, error_message=None):
        pass


class LogFileBackend(AbstractSavingBackend):
    """
    One JSON object per log line. Per-iteration signals and successful
    slot calls go out at DEBUG so that the console shows epochs, not
    batches; failed slots are warnings.
    """

    def log_signal_emitted(self, signal: Signal, slots: List[Callable]) -> uuid.UUID:
        self.track_run(signal)
        emitted_signal_id = uuid.uuid4()
        entry = {
            "event": "signal_emitted",
            "emitted_signal_id": str(emitted_signal_id),
            "run_dir": self.run_dir,
            "signal_type": type(signal).__name__,
            "signal_fields": signal_fields(signal),
            "triggered_slots": [slot_name(slot) for slot in slots],
        }
        level = logging.DEBUG if signal.per_iteration else logging.INFO
        logger.log(level, json.dumps(entry))
        return emitted_signal_id

    def log_slot_execution(self, emitted_signal_id, slot, status, duration_ms, error_message=None):
        entry = {
            "event": "slot_executed",
            "emitted_signal_id": str(emitted_signal_id),
            "slot_name": slot_name(slot),
            "status": status,
            "duration_ms": round(duration_ms, 2),
        }
        if error_message:
            entry["error"] = error_message
        level = logging.WARNING if status == "error" else logging.DEBUG
        logger.log(level, json.dumps(entry))


class DatabaseBackend(AbstractSavingBackend):
    """
    Stores events in `emitted_signals` / `slot_calls`. Needs an active app
    context (see `maskfill.create_app`).

    A training run emits one `IterationCompleted` per resolution and
    batch, which `metrics.csv` already holds; those are skipped unless
    `record_iterations` is set.
    """

    def __init__(self, record_iterations: bool = False):
        self.record_iterations = record_iterations

    def _commit(self, row: Model, what: str) -> bool:
        try:
            db.session.add(row)
            db.session.commit()
            return True
        except Exception:
            db.session.rollback()
            logger.error("Failed to store %s in the database.", what, exc_info=True)
            return False

    def log_signal_emitted(self, signal: Signal, slots: List[Callable]) -> Optional[int]:
        self.track_run(signal)
        if signal.per_iteration and not self.record_iterations:
            return None
        row = EmittedSignal(
            ts=datetime.now(timezone.utc),
            run_dir=self.run_dir,
            signal_type=type(signal).__name__,
            signal_fields=signal_fields(signal),
            slots=[slot_name(slot) for slot in slots],
        )
        return row.id if self._commit(row, "emitted signal") else None

    def log_slot_execution(self, emitted_signal_id, slot, status, duration_ms, error_message=None):
        if emitted_signal_id is None:
            return
        self._commit(
            SlotCall(
                emitted_signal_id=emitted_signal_id,
                slot_name=slot_name(slot),
                status=status,
                started_at=datetime.now(timezone.utc),
                duration_ms=int(duration_ms),
                error_message=error_message,
            ),
            "slot call",
        )
