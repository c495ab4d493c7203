import time
import traceback
import logging
from contextlib import contextmanager
from dataclasses import dataclass, fields
from inspect import signature, getmodule
from typing import (
    Callable,
    Iterator,
    Type,
    List,
    Dict,
    Any,
    Optional,
    Union,
    get_type_hints,
    get_origin,
    get_args,
)

from .signal import Signal
from .backends import AbstractSavingBackend, NoOpBackend


logger = logging.getLogger(__name__)


def is_optional(hint: type) -> bool:
    args = get_args(hint)
    return get_origin(hint) is Union and len(args) == 2 and type(None) in args


def unoption(hint: type) -> type:
    """Optional[X] -> X; anything else is returned as is."""
    if is_optional(hint):
        return next(typ for typ in get_args(hint) if typ is not type(None))
    return hint


@dataclass
class DeferredConnection:
    signal_name: str
    slot: Callable


class Bus:
    """
    A synchronous signal/slot hub. The training loop and the data
    pipeline emit signals; progress reporters, the CLI and tests connect
    slots to them.

    A slot connected to a signal class also receives its subclasses, so
    `bus.connect(Signal, slot)` sees everything. Slots get the signal
    fields they name as parameters (or all of them with `**kwargs`).
    A failing slot is logged and never interrupts the emitter.
    """

    def __init__(
        self,
        config: Optional[object] = None,
        saving_backend: Optional[AbstractSavingBackend] = None,
    ):
        self._slots: Dict[Type[Signal], List[Callable]] = dict()
        self._signal_types: Dict[str, Type[Signal]] = {}
        self._deferred_connections: List[DeferredConnection] = []
        self._saving_backend = saving_backend or NoOpBackend()
        self.config = config

    @classmethod
    def signals(cls, signal_type: Type[Signal] = Signal):
        """Every subclass of `signal_type`, at any depth."""
        descendants = set()
        for sub in signal_type.__subclasses__():
            descendants.add(sub)
            descendants.update(cls.signals(sub))
        return descendants

    def setup(self):
        """
        Register every known signal type and resolve the slots which were
        connected by signal name before the type was known.
        """
        for signal_type in self.signals():
            self.register(signal_type)
        pending, self._deferred_connections = self._deferred_connections, []
        for conn in pending:
            signal_type = self.get_signal_type(conn.signal_name)
            if signal_type is None:
                logger.error(
                    "Cannot connect slot %s to unknown signal %r.",
                    getattr(conn.slot, "__name__", conn.slot),
                    conn.signal_name,
                )
                continue
            self.connect(signal_type, conn.slot)
        logger.debug("Bus setup complete: %d signal types.", len(self._signal_types))

    def register(self, signal_type: Type[Signal]):
        if not (isinstance(signal_type, type) and issubclass(signal_type, Signal)):
            raise TypeError("Signals must inherit from maskfill.bus.Signal.")
        name = signal_type.__name__
        existing = self._signal_types.get(name)
        if existing is not None and existing is not signal_type:
            logger.warning(
                "Signal name %r is taken by %s.%s; %s.%s replaces it.",
                name,
                getmodule(existing).__name__,
                name,
                getmodule(signal_type).__name__,
                name,
            )
        self._signal_types[name] = signal_type
        self._slots.setdefault(signal_type, [])

    def get_signal_type(self, name: str) -> Optional[Type[Signal]]:
        return self._signal_types.get(name)

    def on(self, signal_type_or_name: Union[Type[Signal], str]):
        """Decorator form of `connect`; a name is resolved at `setup()`."""

        def _wrapper(slot: Callable) -> Callable:
            if isinstance(signal_type_or_name, str):
                self._deferred_connections.append(
                    DeferredConnection(signal_type_or_name, slot)
                )
            else:
                self.connect(signal_type_or_name, slot)
            return slot

        return _wrapper

    def connect(self, signal_type: Type[Signal], slot: Callable):
        self.register(signal_type)
        self._check_slot_parameters(signal_type, slot)
        if slot not in self._slots[signal_type]:
            self._slots[signal_type].append(slot)

    def disconnect(self, signal_type: Type[Signal], slot: Callable):
        slots = self._slots.get(signal_type, [])
        if slot in slots:
            slots.remove(slot)

    @contextmanager
    def connected(self, signal_type: Type[Signal], slot: Callable) -> Iterator[Callable]:
        """Keep `slot` connected for the duration of a `with` block."""
        self.connect(signal_type, slot)
        try:
            yield slot
        finally:
            self.disconnect(signal_type, slot)

    def _check_slot_parameters(self, signal_type: Type[Signal], slot: Callable):
        """Warn about slot parameters whose annotation disagrees with the field."""
        try:
            parameters = signature(slot).parameters.values()
        except (TypeError, ValueError):
            return
        hints = get_type_hints(signal_type)
        for param in parameters:
            if param.name not in hints or param.annotation is param.empty:
                continue
            expected = unoption(hints[param.name])
            declared = unoption(param.annotation)
            if declared != expected:
                logger.warning(
                    "Slot parameter %r expects %s, but %s.%s is %s.",
                    param.name,
                    declared,
                    signal_type.__name__,
                    param.name,
                    expected,
                )

    def _slots_for(self, signal_type: Type[Signal]) -> List[Callable]:
        slots: List[Callable] = []
        for klass in signal_type.__mro__:
            for slot in self._slots.get(klass, []):
                if slot not in slots:
                    slots.append(slot)
            if klass is Signal:
                break
        return slots

    @staticmethod
    def _slot_arguments(slot: Callable, values: Dict[str, Any]) -> Dict[str, Any]:
        try:
            params = signature(slot).parameters.values()
        except (TypeError, ValueError):
            return dict(values)
        if any(p.kind == p.VAR_KEYWORD for p in params):
            return dict(values)
        return {p.name: values[p.name] for p in params if p.name in values}

    def emit(self, signal: Signal) -> List[Any]:
        """Call the slots of `signal` in connection order; return their results."""
        slots = self._slots_for(type(signal))
        if not signal.per_iteration:
            logger.debug("SIGNAL: %s", signal)
        emitted_signal_id = self._saving_backend.log_signal_emitted(signal, slots)
        # Field values as they are, no deep copy.
        values = {f.name: getattr(signal, f.name) for f in fields(signal)}
        results = []
        for slot in slots:
            started = time.perf_counter()
            status, error_message = "success", None
            try:
                results.append(slot(**self._slot_arguments(slot, values)))
            except Exception:
                status, error_message = "error", traceback.format_exc()
                logger.error(
                    "Slot %s failed on %s.",
                    getattr(slot, "__name__", slot),
                    type(signal).__name__,
                    exc_info=True,
                )
            self._saving_backend.log_slot_execution(
                emitted_signal_id=emitted_signal_id,
                slot=slot,
                status=status,
                duration_ms=(time.perf_counter() - started) * 1000,
                error_message=error_message,
            )
        return results
