"""Network front door: the wire protocol server.

Framing is newline-delimited JSON over TCP, one object per line.  Requests
carry ``{"id", "method", "params"}``; responses echo the id and hold exactly
one of ``result`` or ``error`` ``{code, message}``.  Requests on one
connection may be answered out of order (each runs on its own worker thread),
so blocking methods never stall other requests or other connections.  A frame
that is not valid JSON poisons only its own connection, which is closed after
an error response.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping

from .errors import BackendError, QfwError, UnknownMethodError, ValidationError
from .qpm import QuantumPlatformManager, TaskInfo
from .qtm import EnsembleError, EnsembleSpec, SchedulerMode, TaskScheduler, run_ensemble
from .resources import NodeSpec, ResourcePool
from .backends import build_registry

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 7421

METHODS = (
    "create_circuit",
    "sync_run",
    "async_run",
    "get_result",
    "run_ensemble",
    "list_backends",
    "utilization",
    "server_stats",
)


@dataclass
class ServerConfig:
    """Topology and protocol settings for one server instance."""

    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    nodes: int = 2
    slots_per_node: int = 8
    mode: str = "many-job"
    per_job_partition: float = 0.5
    backends: list[str] | None = None
    grace_seconds: float = 30.0

    def scheduler_mode(self) -> SchedulerMode:
        name = self.mode.replace("-", "_")
        if name == "many_job":
            return SchedulerMode("many_job")
        if name == "per_job":
            return SchedulerMode("per_job", self.per_job_partition)
        raise ValueError(f"unknown mode {self.mode!r}")


class QfwService:
    """Transport-free dispatcher from wire methods to framework operations."""

    def __init__(self, manager: QuantumPlatformManager, scheduler: TaskScheduler,
                 mode: str):
        self.manager = manager
        self.scheduler = scheduler
        self.mode = mode
        self.started_at = time.monotonic()
        self.connections = 0

    def dispatch(self, request: Mapping, session: str = "default") -> dict:
        request_id = request.get("id") if isinstance(request, Mapping) else None
        try:
            if not isinstance(request, Mapping):
                raise ValidationError("request frame must be a JSON object")
            method = request.get("method")
            if not isinstance(method, str) or not method:
                raise ValidationError("request needs a nonempty 'method'")
            params = request.get("params", {})
            if not isinstance(params, Mapping):
                raise ValidationError("request 'params' must be an object")
            if method not in METHODS:
                raise UnknownMethodError(f"unknown method {method!r}")
            result = getattr(self, f"_handle_{method}")(params, session)
            return {"id": request_id, "ok": True, "result": result}
        except QfwError as exc:
            return {"id": request_id, "ok": False,
                    "error": {"code": exc.code, "message": exc.message}}
        except Exception as exc:  # unexpected internal failure
            return {"id": request_id, "ok": False,
                    "error": {"code": 4, "message": f"internal error: {exc}"}}

    def _handle_create_circuit(self, params: Mapping, session: str) -> dict:
        cid = self.manager.create_circuit(TaskInfo.from_mapping(params))
        return {"cid": cid}

    @staticmethod
    def _cid(params: Mapping) -> str:
        cid = params.get("cid")
        if not isinstance(cid, str) or not cid:
            raise ValidationError("request needs a 'cid' string")
        return cid

    def _handle_sync_run(self, params: Mapping, session: str) -> dict:
        rc, result, stats = self.manager.sync_run(self._cid(params), session=session)
        return {
            "rc": rc,
            "result": result.to_dict() if result is not None else None,
            "stats": stats,
        }

    def _handle_async_run(self, params: Mapping, session: str) -> dict:
        cid = self.manager.async_run(self._cid(params), session=session)
        return {"cid": cid, "acknowledged": True}

    def _handle_get_result(self, params: Mapping, session: str) -> dict:
        handle = self.manager.get_result(self._cid(params))
        return {
            "cid": handle.cid,
            "state": handle.state,
            "result": handle.result.to_dict() if handle.result is not None else None,
            "error": handle.error,
        }

    def _handle_run_ensemble(self, params: Mapping, session: str) -> dict:
        cids = params.get("cids")
        if not isinstance(cids, list) or not all(isinstance(c, str) for c in cids):
            raise ValidationError("request needs 'cids', a list of circuit ids")
        repetitions = params.get("repetitions", 1)
        if not isinstance(repetitions, int) or isinstance(repetitions, bool):
            raise ValidationError("'repetitions' must be an integer")
        try:
            merged = run_ensemble(self.manager, EnsembleSpec(cids, repetitions),
                                  session=session)
        except EnsembleError as exc:
            completed = exc.partial.shots if exc.partial is not None else 0
            raise BackendError(f"{exc} ({completed} shot(s) completed)") from exc
        return {"result": merged.to_dict()}

    def _handle_list_backends(self, params: Mapping, session: str) -> dict:
        return {"backends": [d.to_dict() for d in self.manager.list_backends()]}

    def _handle_utilization(self, params: Mapping, session: str) -> dict:
        snapshot = self.scheduler.utilization()
        return {
            "nodes": [
                {"node_id": n.node_id, "allocated": n.allocated, "capacity": n.capacity}
                for n in snapshot.nodes
            ],
            "queue_length": snapshot.queue_length,
        }

    def _handle_server_stats(self, params: Mapping, session: str) -> dict:
        return {
            "uptime_seconds": time.monotonic() - self.started_at,
            "mode": self.mode,
            "tasks_created": self.manager.tasks_created,
            "tasks_completed": self.manager.tasks_completed,
            "tasks_failed": self.manager.tasks_failed,
            "connections": self.connections,
        }


class QfwServer:
    """TCP server hosting one pool, one scheduler and one backend registry."""

    def __init__(self, config: ServerConfig, registry=None):
        if config.nodes < 1:
            raise ValueError("config needs at least one node")
        if config.slots_per_node < 1:
            raise ValueError("config needs at least one slot per node")
        mode = config.scheduler_mode()
        self.config = config
        self.pool = ResourcePool(
            [NodeSpec(f"node{i + 1}", config.slots_per_node) for i in range(config.nodes)]
        )
        self.scheduler = TaskScheduler(self.pool)
        if mode.mode != "many_job":
            self.scheduler.set_mode(mode)
        self.manager = QuantumPlatformManager(
            self.scheduler, registry if registry is not None else build_registry(config.backends)
        )
        self.service = QfwService(self.manager, self.scheduler, config.mode)
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._requests = ThreadPoolExecutor(
            max_workers=max(32, 2 * self.pool.total_slots)
        )
        self._connections: set[socket.socket] = set()
        self._conn_lock = threading.Lock()
        self._closing = threading.Event()
        self._next_session = 0

    # lifecycle

    def start(self) -> "QfwServer":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.host, self.config.port))
        listener.listen(64)
        self._listener = listener
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    @property
    def address(self) -> tuple[str, int]:
        assert self._listener is not None, "server not started"
        host, port = self._listener.getsockname()[:2]
        return host, port

    def close(self, grace: float | None = None) -> None:
        """Stop accepting, drain running tasks within the grace period, cancel the rest."""
        if self._closing.is_set():
            return
        self._closing.set()
        if self._listener is not None:
            self._listener.close()
        grace = self.config.grace_seconds if grace is None else grace
        self.scheduler.drain(grace)
        self.scheduler.cancel_queued(lambda task: None)
        with self._conn_lock:
            conns = list(self._connections)
        for conn in conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            conn.close()
        self._requests.shutdown(wait=False, cancel_futures=True)
        self.scheduler.shutdown(0)

    def __enter__(self) -> "QfwServer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # connection handling

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._closing.is_set():
            try:
                conn, _ = self._listener.accept()
            except OSError:
                break
            with self._conn_lock:
                self._connections.add(conn)
                self._next_session += 1
                session = f"conn-{self._next_session}"
                self.service.connections += 1
            thread = threading.Thread(
                target=self._serve_connection, args=(conn, session), daemon=True
            )
            thread.start()

    def _serve_connection(self, conn: socket.socket, session: str) -> None:
        write_lock = threading.Lock()

        def send(payload: dict) -> None:
            data = json.dumps(payload, separators=(",", ":")).encode() + b"\n"
            with write_lock:
                try:
                    conn.sendall(data)
                except OSError:
                    pass

        try:
            reader = conn.makefile("rb")
            for raw in reader:
                line = raw.strip()
                if not line:
                    continue
                try:
                    request = json.loads(line)
                except json.JSONDecodeError as exc:
                    send({"id": None, "ok": False,
                          "error": {"code": 1, "message": f"malformed frame: {exc}"}})
                    break
                if not isinstance(request, dict):
                    send({"id": None, "ok": False,
                          "error": {"code": 1, "message": "frame must be a JSON object"}})
                    break
                self._requests.submit(self._answer, request, session, send)
        except (OSError, ValueError):
            pass
        finally:
            with self._conn_lock:
                self._connections.discard(conn)
                self.service.connections -= 1
            try:
                conn.close()
            except OSError:
                pass

    def _answer(self, request: dict, session: str, send) -> None:
        send(self.service.dispatch(request, session))


def serve(config: ServerConfig, registry=None) -> QfwServer:
    """Construct pool, scheduler and registry, then listen until shutdown."""
    return QfwServer(config, registry=registry).start()
