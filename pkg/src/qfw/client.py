"""Socket client for the wire protocol, used by the CLI and the bench harness.

One client holds one connection and issues one request at a time, with
strictly increasing request ids.  Server-side errors surface as
:class:`ServerError` carrying the protocol error code.
"""

from __future__ import annotations

import json
import os
import socket
from typing import Mapping

from .service import DEFAULT_HOST, DEFAULT_PORT

ADDR_ENV_VAR = "QFW_ADDR"


class ServerError(Exception):
    """Error response from the server, with its wire protocol code."""

    def __init__(self, code: int, message: str):
        super().__init__(f"[code {code}] {message}")
        self.code = code
        self.message = message


def resolve_address(address: str | tuple[str, int] | None = None) -> tuple[str, int]:
    """Pick the server address: explicit argument, QFW_ADDR, then the default."""
    if address is None:
        address = os.environ.get(ADDR_ENV_VAR)
    if address is None:
        return DEFAULT_HOST, DEFAULT_PORT
    if isinstance(address, tuple):
        return address
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"address must look like host:port, got {address!r}")
    return host, int(port)


class ServiceClient:
    """Blocking request/response client over newline-delimited JSON."""

    def __init__(self, address: str | tuple[str, int] | None = None, timeout: float = 60.0):
        host, port = resolve_address(address)
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._reader = self._sock.makefile("rb")
        self._next_id = 0

    def close(self) -> None:
        try:
            self._reader.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def call(self, method: str, **params) -> dict:
        """One protocol round trip; returns the result object or raises."""
        self._next_id += 1
        request_id = str(self._next_id)
        frame = json.dumps({"id": request_id, "method": method, "params": params})
        self._sock.sendall(frame.encode() + b"\n")
        line = self._reader.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        response = json.loads(line)
        if response.get("id") != request_id:
            raise ConnectionError(
                f"response id {response.get('id')!r} does not match request {request_id!r}"
            )
        if response.get("ok"):
            return response["result"]
        error = response.get("error", {})
        raise ServerError(int(error.get("code", 0)), str(error.get("message", "")))

    # convenience wrappers mirroring the wire methods

    def create_circuit(self, info: Mapping) -> str:
        return self.call("create_circuit", **info)["cid"]

    def sync_run(self, cid: str) -> tuple[int, dict | None, dict]:
        reply = self.call("sync_run", cid=cid)
        return reply["rc"], reply["result"], reply["stats"]

    def async_run(self, cid: str) -> str:
        return self.call("async_run", cid=cid)["cid"]

    def get_result(self, cid: str) -> dict:
        return self.call("get_result", cid=cid)

    def run_ensemble(self, cids: list[str], repetitions: int = 1) -> dict:
        return self.call("run_ensemble", cids=cids, repetitions=repetitions)["result"]

    def list_backends(self) -> list[dict]:
        return self.call("list_backends")["backends"]

    def utilization(self) -> dict:
        return self.call("utilization")

    def server_stats(self) -> dict:
        return self.call("server_stats")
