from dataclasses import dataclass
from typing import Optional
import pytest
from unittest.mock import MagicMock

from . import (
    Signal,
    Bus,
    SnapshotSaved,
    EpochCompleted,
    IterationCompleted,
    unoption,
    create_bus,
    NoOpBackend,
    LogFileBackend,
)


@pytest.fixture
def bus():
    return Bus()


def test_register_signal(bus):
    @dataclass
    class TestSignal(Signal):
        pass

    assert TestSignal not in bus._slots
    bus.register(TestSignal)
    assert TestSignal in bus._slots


def test_register_non_signal_should_raise_type_error(bus):
    with pytest.raises(TypeError):
        bus.register(object)


def test_connect_slot(bus):
    slot = MagicMock()
    bus.connect(SnapshotSaved, slot)
    assert slot in bus._slots[SnapshotSaved]


def test_emit_signal_without_slots(bus):
    assert bus.emit(SnapshotSaved(path="a.ckpt", epoch=10)) == []


def test_emit_passes_matching_fields(bus):
    received = []

    @bus.on(SnapshotSaved)
    def on_snapshot(epoch: int):
        received.append(epoch)

    bus.emit(SnapshotSaved(path="a.ckpt", epoch=20))
    assert received == [20]


def test_failing_slot_does_not_stop_others(bus):
    calls = []

    @bus.on(SnapshotSaved)
    def broken(path: str):
        raise RuntimeError("boom")

    @bus.on(SnapshotSaved)
    def working(path: str):
        calls.append(path)

    bus.emit(SnapshotSaved(path="b.ckpt", epoch=1))
    assert calls == ["b.ckpt"]


def test_deferred_connection_by_name(bus):
    slot = MagicMock()
    bus.on("SnapshotSaved")(slot)
    bus.setup()
    bus.emit(SnapshotSaved(path="c.ckpt", epoch=3))
    slot.assert_called_once_with(path="c.ckpt", epoch=3)


def test_create_bus_picks_backend():
    class LogConfig:
        SIGNALS = {"logging_backend": "log"}

    class QuietConfig:
        SIGNALS = {"logging_backend": "none"}

    class WrongConfig:
        SIGNALS = {"logging_backend": "carrier-pigeon"}

    assert isinstance(create_bus(LogConfig)._saving_backend, LogFileBackend)
    assert isinstance(create_bus(QuietConfig)._saving_backend, NoOpBackend)
    with pytest.raises(NotImplementedError):
        create_bus(WrongConfig)


def test_slot_on_base_class_sees_every_signal(bus):
    seen = []
    bus.connect(Signal, lambda **fields: seen.append(sorted(fields)))
    bus.emit(SnapshotSaved(path="a.ckpt", epoch=1))
    bus.emit(EpochCompleted(epoch=1, stage=None, iterations=4))
    assert seen == [["epoch", "path"], ["epoch", "iterations", "stage"]]


def test_slot_connected_twice_through_hierarchy_runs_once(bus):
    slot = MagicMock()
    bus.connect(Signal, slot)
    bus.connect(SnapshotSaved, slot)
    bus.emit(SnapshotSaved(path="a.ckpt", epoch=1))
    slot.assert_called_once()


def test_connected_disconnects_on_exit(bus):
    received = []
    with bus.connected(SnapshotSaved, lambda epoch: received.append(epoch)):
        bus.emit(SnapshotSaved(path="a.ckpt", epoch=1))
    bus.emit(SnapshotSaved(path="a.ckpt", epoch=2))
    assert received == [1]
    assert bus._slots[SnapshotSaved] == []


def test_connected_disconnects_on_error(bus):
    slot = MagicMock()
    with pytest.raises(KeyError):
        with bus.connected(SnapshotSaved, slot):
            raise KeyError("x")
    assert slot not in bus._slots[SnapshotSaved]


def test_unoption():
    assert unoption(Optional[int]) is int
    assert unoption(int) is int


def test_mismatched_slot_annotation_warns(bus, caplog):
    def slot(epoch: str):
        pass

    bus.connect(SnapshotSaved, slot)
    assert "expects" in caplog.text


def test_per_iteration_flag():
    assert IterationCompleted.per_iteration
    assert not SnapshotSaved.per_iteration
