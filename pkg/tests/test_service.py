"""Wire protocol server: framing, error codes, pipelining, isolation."""

from __future__ import annotations

import json
import socket
import time

import pytest

from qfw.bench import ghz
from qfw.client import ServerError, ServiceClient, resolve_address
from qfw.qasm import emit
from qfw.service import ServerConfig, serve


def ghz_info(n: int, shots: int = 128, **extra) -> dict:
    return {"qasm": emit(ghz(n)), "num_qubits": n, "num_shots": shots,
            "compiler": ""} | extra


class RawConnection:
    """Byte-level wire client used to exercise the framing directly."""

    def __init__(self, address: tuple[str, int]):
        self.sock = socket.create_connection(address, timeout=10)
        self.reader = self.sock.makefile("rb")

    def send_line(self, data: bytes) -> None:
        self.sock.sendall(data + b"\n")

    def send(self, request: dict) -> None:
        self.send_line(json.dumps(request).encode())

    def recv(self) -> dict | None:
        line = self.reader.readline()
        return json.loads(line) if line else None

    def close(self) -> None:
        self.sock.close()


class TestDispatch:
    def test_list_backends_over_wire(self, server_factory):
        server = server_factory()
        conn = RawConnection(server.address)
        conn.send({"id": "1", "method": "list_backends", "params": {}})
        response = conn.recv()
        assert response["id"] == "1"
        assert response["ok"] is True
        assert len(response["result"]["backends"]) >= 2
        conn.close()

    def test_unknown_method_is_code_3(self, server_factory):
        server = server_factory()
        conn = RawConnection(server.address)
        conn.send({"id": "2", "method": "nope", "params": {}})
        response = conn.recv()
        assert response["ok"] is False
        assert response["error"]["code"] == 3
        # the connection survives method errors
        conn.send({"id": "3", "method": "utilization", "params": {}})
        assert conn.recv()["ok"] is True
        conn.close()

    def test_ghz5_round_trip(self, server_factory):
        server = server_factory()
        conn = RawConnection(server.address)
        conn.send({"id": "a", "method": "create_circuit", "params": ghz_info(5, seed=3)})
        created = conn.recv()
        assert created["ok"]
        cid = created["result"]["cid"]
        conn.send({"id": "b", "method": "sync_run", "params": {"cid": cid}})
        finished = conn.recv()
        assert finished["ok"]
        assert finished["result"]["rc"] == 0
        counts = finished["result"]["result"]["counts"]
        assert set(counts) <= {"00000", "11111"}
        assert sum(counts.values()) == 128
        conn.close()

    def test_validation_error_is_code_1(self, server_factory):
        server = server_factory()
        with ServiceClient(server.address) as client:
            with pytest.raises(ServerError) as excinfo:
                client.create_circuit({"qasm": "garbage", "num_qubits": 1, "num_shots": 1})
            assert excinfo.value.code == 1

    def test_invalid_state_is_code_5(self, server_factory):
        server = server_factory()
        with ServiceClient(server.address) as client:
            cid = client.create_circuit(ghz_info(2))
            client.sync_run(cid)
            with pytest.raises(ServerError) as excinfo:
                client.sync_run(cid)
            assert excinfo.value.code == 5

    def test_utilization_snapshot(self, server_factory):
        server = server_factory(nodes=2, slots_per_node=8)
        with ServiceClient(server.address) as client:
            snapshot = client.utilization()
            assert [(n["node_id"], n["allocated"], n["capacity"]) for n in snapshot["nodes"]] \
                == [("node1", 0, 8), ("node2", 0, 8)]
            assert snapshot["queue_length"] == 0

    def test_server_stats(self, server_factory):
        server = server_factory()
        with ServiceClient(server.address) as client:
            client.sync_run(client.create_circuit(ghz_info(2)))
            stats = client.server_stats()
            assert stats["tasks_created"] == 1
            assert stats["tasks_completed"] == 1
            assert stats["mode"] == "many-job"
            assert stats["connections"] >= 1
            assert stats["uptime_seconds"] > 0

    def test_ensemble_over_wire(self, server_factory):
        server = server_factory()
        with ServiceClient(server.address) as client:
            cids = [client.create_circuit(ghz_info(2, shots=64, seed=i)) for i in range(2)]
            merged = client.run_ensemble(cids, repetitions=2)
            assert merged["shots"] == 256

    def test_get_result_lifecycle(self, server_factory):
        server = server_factory(backends=["statevector", "mock:0.1"])
        with ServiceClient(server.address) as client:
            cid = client.create_circuit(ghz_info(2, backend="mock"))
            client.async_run(cid)
            snapshot = client.get_result(cid)
            assert snapshot["state"] in ("queued", "running", "done")
            deadline = time.monotonic() + 5
            while snapshot["state"] != "done" and time.monotonic() < deadline:
                snapshot = client.get_result(cid)
            assert snapshot["state"] == "done"
            assert snapshot["result"]["counts"] == {"00": 128}


class TestFraming:
    def test_malformed_frame_errors_and_closes(self, server_factory):
        server = server_factory()
        conn = RawConnection(server.address)
        conn.send_line(b"this is not json")
        response = conn.recv()
        assert response["ok"] is False
        assert response["error"]["code"] == 1
        assert conn.recv() is None  # server closed the connection
        conn.close()

    def test_malformed_frame_does_not_touch_other_connections(self, server_factory):
        server = server_factory()
        healthy = RawConnection(server.address)
        broken = RawConnection(server.address)
        broken.send_line(b"{nope")
        assert broken.recv()["ok"] is False
        healthy.send({"id": "1", "method": "list_backends", "params": {}})
        assert healthy.recv()["ok"] is True
        healthy.close()
        broken.close()

    def test_missing_method_is_code_1_and_keeps_connection(self, server_factory):
        server = server_factory()
        conn = RawConnection(server.address)
        conn.send({"id": "1", "params": {}})
        assert conn.recv()["error"]["code"] == 1
        conn.send({"id": "2", "method": "list_backends", "params": {}})
        assert conn.recv()["ok"] is True
        conn.close()

    def test_pipelined_requests_answer_out_of_order(self, server_factory):
        server = server_factory(backends=["statevector", "mock:0.3"])
        conn = RawConnection(server.address)
        conn.send({"id": "slow-create", "method": "create_circuit",
                   "params": ghz_info(2, backend="mock")})
        cid = conn.recv()["result"]["cid"]
        conn.send({"id": "slow", "method": "sync_run", "params": {"cid": cid}})
        conn.send({"id": "fast", "method": "list_backends", "params": {}})
        first = conn.recv()
        second = conn.recv()
        assert first["id"] == "fast"
        assert second["id"] == "slow"
        conn.close()

    def test_blocking_call_does_not_stall_other_connections(self, server_factory):
        server = server_factory(backends=["statevector", "mock:0.4"])
        blocker = ServiceClient(server.address)
        cid = blocker.create_circuit(ghz_info(2, backend="mock"))
        blocker.call("async_run", cid=cid)
        started = time.perf_counter()
        with ServiceClient(server.address) as other:
            other.list_backends()
        assert time.perf_counter() - started < 0.3
        blocker.close()


class TestLifecycle:
    def test_two_servers_cannot_share_a_port(self, server_factory):
        server = server_factory()
        _, port = server.address
        with pytest.raises(OSError):
            serve(ServerConfig(port=port))

    def test_zero_nodes_is_a_config_error(self):
        with pytest.raises(ValueError):
            serve(ServerConfig(port=0, nodes=0))

    def test_close_drains_running_tasks(self, server_factory):
        server = server_factory(backends=["statevector", "mock:0.2"])
        client = ServiceClient(server.address)
        cid = client.create_circuit(ghz_info(2, backend="mock"))
        client.async_run(cid)
        server.close(grace=5.0)
        assert server.manager.get_result(cid).state == "done"

    def test_per_job_server_mode(self, server_factory):
        server = server_factory(mode="per-job", per_job_partition=0.5)
        with ServiceClient(server.address) as client:
            rc, result, _ = client.sync_run(client.create_circuit(ghz_info(2, seed=1)))
            assert rc == 0
            assert sum(result["counts"].values()) == 128


class TestAddressResolution:
    def test_explicit_beats_env(self, monkeypatch):
        monkeypatch.setenv("QFW_ADDR", "example.org:9999")
        assert resolve_address("somewhere:1234") == ("somewhere", 1234)

    def test_env_beats_default(self, monkeypatch):
        monkeypatch.setenv("QFW_ADDR", "example.org:9999")
        assert resolve_address() == ("example.org", 9999)

    def test_default(self, monkeypatch):
        monkeypatch.delenv("QFW_ADDR", raising=False)
        assert resolve_address() == ("127.0.0.1", 7421)

    def test_bad_address_string(self):
        with pytest.raises(ValueError):
            resolve_address("nonsense")
