"""Thin client SDK for the qfw wire protocol.

Speaks newline-delimited JSON over TCP.  Every call is one blocking request
and response round trip with strictly increasing ids; the SDK adds no
client-side concurrency, callers wanting parallelism open one session per
thread.  Server error codes surface verbatim as :class:`ServerError`
(1 parse/validation, 2 resource, 3 unknown method, 4 backend failure,
5 invalid state).

A submission mirrors the server's task API end to end::

    with ClientSession() as qpm_api:
        info = {}
        info["qasm"] = qasm
        info["num_qubits"] = 20
        info["num_shots"] = 1
        info["compiler"] = "staq"
        cid = qpm_api.create_circuit(info)
        rc, circ_result, stats = qpm_api.sync_run(cid)
"""

from __future__ import annotations

import json
import os
import socket
from dataclasses import dataclass, field
from typing import Any, Mapping

__all__ = [
    "ADDR_ENV_VAR",
    "DEFAULT_ADDRESS",
    "CircuitResult",
    "CircuitStatus",
    "ClientSession",
    "ServerError",
]

ADDR_ENV_VAR = "QFW_ADDR"
DEFAULT_ADDRESS = ("127.0.0.1", 7421)


class ServerError(Exception):
    """Error response from the server, carrying its protocol code."""

    def __init__(self, code: int, message: str):
        super().__init__(f"[code {code}] {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class CircuitResult:
    """Execution result: bitstring counts, total shots, execution stats."""

    counts: dict[str, int]
    shots: int
    stats: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_wire(cls, payload: Mapping | None) -> "CircuitResult | None":
        if payload is None:
            return None
        return cls(dict(payload["counts"]), int(payload["shots"]),
                   dict(payload.get("stats", {})))


@dataclass(frozen=True)
class CircuitStatus:
    """Lifecycle snapshot returned by get_result."""

    cid: str
    state: str
    result: CircuitResult | None
    error: str | None

    @property
    def done(self) -> bool:
        return self.state in ("done", "failed")


def _resolve(address: str | tuple[str, int] | None) -> tuple[str, int]:
    if address is None:
        address = os.environ.get(ADDR_ENV_VAR)
    if address is None:
        return DEFAULT_ADDRESS
    if isinstance(address, tuple):
        return address
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host, int(port)


class ClientSession:
    """One connection to a server; not safe for concurrent use from threads."""

    def __init__(self, address: str | tuple[str, int] | None = None,
                 timeout: float = 60.0):
        self.address = _resolve(address)
        self._sock = socket.create_connection(self.address, timeout=timeout)
        self._reader = self._sock.makefile("rb")
        self._next_id = 0

    def close(self) -> None:
        try:
            self._reader.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "ClientSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _call(self, method: str, params: Mapping) -> dict:
        self._next_id += 1
        request_id = str(self._next_id)
        frame = json.dumps({"id": request_id, "method": method, "params": dict(params)})
        try:
            self._sock.sendall(frame.encode() + b"\n")
            line = self._reader.readline()
        except OSError as exc:
            raise ConnectionError(f"session to {self.address} is broken: {exc}") from exc
        if not line:
            raise ConnectionError("server closed the connection")
        response = json.loads(line)
        if response.get("id") != request_id:
            raise ConnectionError(
                f"response id {response.get('id')!r} does not match request {request_id!r}"
            )
        if response.get("ok"):
            return response["result"]
        error = response.get("error") or {}
        raise ServerError(int(error.get("code", 0)), str(error.get("message", "")))

    # exported task API

    def create_circuit(self, info: Mapping) -> str:
        """Register a task; info carries qasm, num_qubits, num_shots and
        optionally compiler, backend and seed."""
        return self._call("create_circuit", info)["cid"]

    def sync_run(self, cid: str) -> tuple[int, CircuitResult | None, dict]:
        """Block until the task finishes; returns (rc, result, stats)."""
        reply = self._call("sync_run", {"cid": cid})
        return reply["rc"], CircuitResult.from_wire(reply["result"]), reply["stats"]

    def async_run(self, cid: str) -> str:
        """Start the task and return immediately; poll with get_result."""
        return self._call("async_run", {"cid": cid})["cid"]

    def get_result(self, cid: str) -> CircuitStatus:
        reply = self._call("get_result", {"cid": cid})
        return CircuitStatus(reply["cid"], reply["state"],
                             CircuitResult.from_wire(reply["result"]), reply["error"])

    def list_backends(self) -> list[dict]:
        return self._call("list_backends", {})["backends"]

    def run_ensemble(self, cids: list[str], repetitions: int = 1) -> CircuitResult:
        reply = self._call("run_ensemble", {"cids": cids, "repetitions": repetitions})
        return CircuitResult.from_wire(reply["result"])

    def utilization(self) -> dict:
        return self._call("utilization", {})

    def server_stats(self) -> dict:
        return self._call("server_stats", {})
