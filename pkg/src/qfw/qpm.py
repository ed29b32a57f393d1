"""Quantum Platform Manager: the uniform circuit-execution API.

Registers circuits, sizes simulator instances from qubit count, picks a
backend (explicit per-task choice wins over the registry default) and runs
tasks through the scheduler.  The sizing heuristic is pluggable; the default
asks for one process per started block of ten qubits.

Return-code convention for ``sync_run``: 0 success, 1 backend failure,
2 resource rejection at dispatch.  Invalid requests (unknown cid, wrong handle
state) raise instead of returning a code.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .backends import BackendDescriptor, BackendRegistry, build_registry
from .circuit import Circuit
from .errors import InvalidStateError, ValidationError
from .qasm import ParseError, parse
from .qtm import ScheduledTask, TaskScheduler
from .resources import Placement
from .simulator import ExecutionResult

PROCS_PER_QUBIT_BLOCK = 10


def procs_for_circuit(num_qubits: int) -> int:
    """Simulator processes for a circuit: one per started block of 10 qubits."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be at least 1")
    return math.ceil(num_qubits / PROCS_PER_QUBIT_BLOCK)


def default_sizing(circuit: Circuit) -> int:
    """Default sizing hook; replace it to also weigh gate depth."""
    return procs_for_circuit(circuit.num_qubits)


@dataclass
class TaskInfo:
    """A submitted unit of quantum work, mirroring the wire payload."""

    qasm: str
    num_qubits: int
    num_shots: int
    compiler: str = ""
    backend: str | None = None
    seed: int | None = None

    @classmethod
    def from_mapping(cls, data: Mapping) -> "TaskInfo":
        try:
            qasm = data["qasm"]
            num_qubits = data["num_qubits"]
            num_shots = data["num_shots"]
        except KeyError as missing:
            raise ValidationError(f"task info is missing field {missing.args[0]!r}") from None
        if not isinstance(qasm, str):
            raise ValidationError("task info field 'qasm' must be a string")
        if not isinstance(num_qubits, int) or isinstance(num_qubits, bool):
            raise ValidationError("task info field 'num_qubits' must be an integer")
        if not isinstance(num_shots, int) or isinstance(num_shots, bool):
            raise ValidationError("task info field 'num_shots' must be an integer")
        seed = data.get("seed")
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool)):
            raise ValidationError("task info field 'seed' must be an integer")
        backend = data.get("backend")
        if backend is not None and not isinstance(backend, str):
            raise ValidationError("task info field 'backend' must be a string")
        return cls(qasm, num_qubits, num_shots, str(data.get("compiler", "")), backend, seed)


_STATE_RANK = {"created": 0, "queued": 1, "running": 2, "done": 3, "failed": 3}


@dataclass
class CircuitHandle:
    """Snapshot of a registered circuit's lifecycle state."""

    cid: str
    state: str
    result: ExecutionResult | None = None
    error: str | None = None


@dataclass
class _TaskRecord:
    cid: str
    info: TaskInfo
    circuit: Circuit
    backend: object
    procs: int
    state: str = "created"
    result: ExecutionResult | None = None
    error: str | None = None
    rc: int = 0
    stats: dict = field(default_factory=dict)
    placement: Placement | None = None
    finished: threading.Event = field(default_factory=threading.Event)


class QuantumPlatformManager:
    """Create, run and track circuits against registered backends."""

    def __init__(self, scheduler: TaskScheduler, registry: BackendRegistry | None = None,
                 sizing: Callable[[Circuit], int] | None = None):
        self.scheduler = scheduler
        self.registry = registry if registry is not None else build_registry()
        self.sizing = sizing if sizing is not None else default_sizing
        self._records: dict[str, _TaskRecord] = {}
        self._lock = threading.Lock()
        self._next_cid = 0
        self.tasks_created = 0
        self.tasks_completed = 0
        self.tasks_failed = 0

    # registration

    def create_circuit(self, info: TaskInfo | Mapping) -> str:
        """Validate and cache a task; returns a fresh cid in state created."""
        if not isinstance(info, TaskInfo):
            info = TaskInfo.from_mapping(info)
        if info.num_shots < 1:
            raise ValidationError("num_shots must be at least 1")
        try:
            circuit = parse(info.qasm)
        except ParseError as exc:
            raise ValidationError(f"qasm does not parse: {exc}") from exc
        if circuit.num_qubits != info.num_qubits:
            raise ValidationError(
                f"declared num_qubits {info.num_qubits} does not match the parsed "
                f"circuit's {circuit.num_qubits}"
            )
        backend = self.registry.get(info.backend)
        if circuit.num_qubits > backend.max_qubits:
            raise ValidationError(
                f"circuit needs {circuit.num_qubits} qubits but backend "
                f"{backend.name!r} caps at {backend.max_qubits}"
            )
        with self._lock:
            self._next_cid += 1
            cid = f"c-{self._next_cid}"
            self._records[cid] = _TaskRecord(
                cid, info, circuit, backend, self.sizing(circuit)
            )
            self.tasks_created += 1
        return cid

    def clone(self, cid: str, seed_offset: int = 0) -> str:
        """Register a fresh task with the same payload (used for ensemble reruns)."""
        record = self._record(cid)
        info = TaskInfo(
            qasm=record.info.qasm,
            num_qubits=record.info.num_qubits,
            num_shots=record.info.num_shots,
            compiler=record.info.compiler,
            backend=record.info.backend,
            seed=None if record.info.seed is None else record.info.seed + seed_offset,
        )
        return self.create_circuit(info)

    # lookups

    def _record(self, cid: str) -> _TaskRecord:
        record = self._records.get(cid)
        if record is None:
            raise ValidationError(f"unknown circuit id {cid!r}")
        return record

    def circuit(self, cid: str) -> Circuit:
        return self._record(cid).circuit

    def get_result(self, cid: str) -> CircuitHandle:
        """Non-blocking lifecycle snapshot, with result or error when terminal."""
        record = self._record(cid)
        with self._lock:
            return CircuitHandle(record.cid, record.state, record.result, record.error)

    def wait(self, cid: str, timeout: float | None = None) -> CircuitHandle:
        record = self._record(cid)
        if not record.finished.wait(timeout):
            raise TimeoutError(f"circuit {cid} still {record.state}")
        return self.get_result(cid)

    def list_backends(self) -> list[BackendDescriptor]:
        return self.registry.descriptors()

    # execution

    def _transition(self, record: _TaskRecord, new_state: str) -> None:
        with self._lock:
            old = record.state
            legal = (
                (old == "created" and new_state in ("queued", "failed"))
                or (old == "queued" and new_state == "running")
                or (old == "running" and new_state in ("done", "failed"))
            )
            if not legal:
                raise InvalidStateError(f"illegal transition {old} -> {new_state}")
            record.state = new_state

    def _finish(self, record: _TaskRecord, *, result: ExecutionResult | None = None,
                rc: int = 0, error: str | None = None) -> None:
        self._transition(record, "failed" if error is not None else "done")
        with self._lock:
            record.result = result
            record.rc = rc
            record.error = error
            if result is not None:
                record.stats = dict(result.stats)
            if error is None:
                self.tasks_completed += 1
            else:
                self.tasks_failed += 1
        record.finished.set()

    def _execute(self, record: _TaskRecord, placement: Placement) -> None:
        workers = placement.total_procs
        try:
            result = record.backend.run(
                record.circuit, record.info.num_shots, workers=workers,
                seed=record.info.seed,
            )
        except Exception as exc:
            record.stats = {
                "backend": record.backend.name,
                "num_qubits": record.circuit.num_qubits,
                "workers": workers,
            }
            self._finish(record, rc=1,
                         error=f"backend {record.backend.name!r} failed: {exc}")
            return
        result.stats["placement"] = ",".join(
            f"{node}:{count}" for node, count in placement.assignment
        )
        result.stats["procs"] = placement.total_procs
        self._finish(record, result=result)

    def _submit(self, record: _TaskRecord, session: str) -> None:
        if record.state != "created":
            raise InvalidStateError(
                f"circuit {record.cid} is {record.state}, expected created"
            )
        if record.procs > self.scheduler.capacity(session):
            # rejected before queueing: the request can never be satisfied
            record.stats = {
                "backend": record.backend.name,
                "num_qubits": record.circuit.num_qubits,
            }
            self._finish(record, rc=2,
                         error=f"task needs {record.procs} slot(s), over the pool capacity")
            return
        self._transition(record, "queued")

        def on_dispatch(placement: Placement) -> None:
            record.placement = placement
            self._transition(record, "running")

        self.scheduler.submit(
            ScheduledTask(
                cid=record.cid,
                procs=record.procs,
                execute=lambda placement: self._execute(record, placement),
                on_dispatch=on_dispatch,
                session=session,
            )
        )

    def sync_run(self, cid: str, session: str = "default") -> tuple[int, ExecutionResult | None, dict]:
        """Block through queueing, placement and execution; return (rc, result, stats)."""
        record = self._record(cid)
        self._submit(record, session)
        record.finished.wait()
        return record.rc, record.result, dict(record.stats)

    def async_run(self, cid: str, session: str = "default") -> str:
        """Queue the task and return immediately; poll with get_result."""
        record = self._record(cid)
        self._submit(record, session)
        return cid
