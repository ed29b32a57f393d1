"""Platform manager: task lifecycle, heuristics, backend registry."""

from __future__ import annotations

import math
import time

import pytest

from qfw.backends import BackendRegistry, MockBackend, StatevectorBackend, build_registry
from qfw.bench import ghz
from qfw.errors import InvalidStateError, ValidationError
from qfw.qasm import emit
from qfw.qpm import QuantumPlatformManager, TaskInfo, procs_for_circuit
from qfw.qtm import TaskScheduler
from qfw.resources import NodeSpec, ResourcePool


@pytest.fixture
def manager():
    pool = ResourcePool([NodeSpec("node1", 8), NodeSpec("node2", 8)])
    scheduler = TaskScheduler(pool)
    registry = build_registry(["statevector", "mock:0.05"])
    mgr = QuantumPlatformManager(scheduler, registry)
    yield mgr
    scheduler.shutdown(grace=5.0)


def ghz_info(n: int, shots: int = 256, **extra) -> dict:
    info = {"qasm": emit(ghz(n)), "num_qubits": n, "num_shots": shots, "compiler": "staq"}
    info.update(extra)
    return info


class TestProcsHeuristic:
    def test_twenty_qubits_need_two_processes(self):
        assert procs_for_circuit(20) == 2

    @pytest.mark.parametrize("n,procs", [(1, 1), (10, 1), (11, 2), (99, 10), (100, 10)])
    def test_block_boundaries(self, n, procs):
        assert procs_for_circuit(n) == procs

    def test_matches_ceiling_everywhere(self):
        for n in range(1, 101):
            assert procs_for_circuit(n) == math.ceil(n / 10)

    def test_monotone(self):
        values = [procs_for_circuit(n) for n in range(1, 101)]
        assert values == sorted(values)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            procs_for_circuit(0)


class TestCreateCircuit:
    def test_snippet_shaped_info(self, manager):
        cid = manager.create_circuit(ghz_info(20, shots=1))
        assert cid
        assert manager.get_result(cid).state == "created"

    def test_qubit_count_mismatch(self, manager):
        with pytest.raises(ValidationError, match="does not match"):
            manager.create_circuit(ghz_info(3) | {"num_qubits": 5})

    def test_unknown_backend(self, manager):
        with pytest.raises(ValidationError, match="unknown backend"):
            manager.create_circuit(ghz_info(3, backend="nonexistent"))

    def test_backend_qubit_cap(self, manager):
        with pytest.raises(ValidationError, match="caps at"):
            manager.create_circuit(ghz_info(30))  # statevector caps at 24

    def test_bad_qasm(self, manager):
        with pytest.raises(ValidationError, match="does not parse"):
            manager.create_circuit({"qasm": "OPENQASM 2.0; nope", "num_qubits": 1,
                                    "num_shots": 1})

    def test_shots_validated(self, manager):
        with pytest.raises(ValidationError, match="num_shots"):
            manager.create_circuit(ghz_info(2, shots=0))

    def test_info_field_types_checked(self, manager):
        with pytest.raises(ValidationError, match="num_qubits"):
            manager.create_circuit({"qasm": "x", "num_qubits": "three", "num_shots": 1})
        with pytest.raises(ValidationError, match="missing"):
            manager.create_circuit({"qasm": "x", "num_qubits": 3})


class TestSyncRun:
    def test_ghz3_counts(self, manager):
        cid = manager.create_circuit(ghz_info(3, shots=1024, seed=5))
        rc, result, stats = manager.sync_run(cid)
        assert rc == 0
        assert set(result.counts) <= {"000", "111"}
        assert sum(result.counts.values()) == 1024
        assert manager.get_result(cid).state == "done"

    def test_mock_latency_shows_in_stats(self, manager):
        cid = manager.create_circuit(ghz_info(2, shots=4, backend="mock"))
        rc, result, stats = manager.sync_run(cid)
        assert rc == 0
        assert stats["backend"] == "mock"
        assert stats["wall_time_seconds"] >= 0.05
        assert stats["placement"] == "node1:1"
        assert result.counts == {"00": 4}

    def test_rerun_is_invalid_state(self, manager):
        cid = manager.create_circuit(ghz_info(2))
        manager.sync_run(cid)
        with pytest.raises(InvalidStateError):
            manager.sync_run(cid)

    def test_unknown_cid(self, manager):
        with pytest.raises(ValidationError, match="unknown circuit id"):
            manager.sync_run("c-404")

    def test_backend_failure_returns_rc_1(self, manager):
        manager.registry.register(MockBackend("brittle", failure="boom"))
        cid = manager.create_circuit(ghz_info(2, backend="brittle"))
        rc, result, stats = manager.sync_run(cid)
        assert rc == 1
        assert result is None
        handle = manager.get_result(cid)
        assert handle.state == "failed"
        assert "boom" in handle.error

    def test_oversized_task_fails_with_rc_2(self):
        pool = ResourcePool([NodeSpec("only", 2)])
        scheduler = TaskScheduler(pool)
        mgr = QuantumPlatformManager(scheduler, build_registry(["mock"]))
        try:
            cid = mgr.create_circuit(ghz_info(25, backend="mock"))  # needs 3 procs
            rc, result, _ = mgr.sync_run(cid)
            assert rc == 2
            assert result is None
            assert mgr.get_result(cid).state == "failed"
        finally:
            scheduler.shutdown(grace=1.0)

    def test_stats_carry_required_keys(self, manager):
        cid = manager.create_circuit(ghz_info(12, shots=2, seed=0))
        rc, _, stats = manager.sync_run(cid)
        assert rc == 0
        for key in ("wall_time_seconds", "backend", "workers", "num_qubits", "placement"):
            assert key in stats
        assert stats["workers"] == 2  # ceil(12 / 10) processes drive the simulator


class TestAsyncRun:
    def test_async_matches_sync_for_same_seed(self, manager):
        sync_cid = manager.create_circuit(ghz_info(4, shots=512, seed=77))
        _, sync_result, _ = manager.sync_run(sync_cid)
        async_cid = manager.create_circuit(ghz_info(4, shots=512, seed=77))
        manager.async_run(async_cid)
        handle = manager.wait(async_cid, timeout=10)
        assert handle.state == "done"
        assert handle.result.counts == sync_result.counts

    def test_poll_states_move_forward(self, manager):
        cid = manager.create_circuit(ghz_info(2, backend="mock"))
        manager.async_run(cid)
        assert manager.get_result(cid).state in ("queued", "running", "done")
        handle = manager.wait(cid, timeout=10)
        assert handle.state == "done"
        assert sum(handle.result.counts.values()) == 256

    def test_eight_concurrent_ghz20(self, manager):
        cids = [manager.create_circuit(ghz_info(20, shots=1, backend="mock"))
                for _ in range(8)]
        for cid in cids:
            manager.async_run(cid)
        for cid in cids:
            assert manager.wait(cid, timeout=30).state == "done"

    def test_async_unknown_cid(self, manager):
        with pytest.raises(ValidationError):
            manager.async_run("c-nope")

    def test_slots_held_while_running(self, manager):
        cid = manager.create_circuit(ghz_info(20, shots=1, backend="mock"))
        manager.async_run(cid)
        deadline = time.monotonic() + 5
        seen_running = False
        while time.monotonic() < deadline:
            snapshot = manager.scheduler.utilization()
            allocated = sum(n.allocated for n in snapshot.nodes)
            if allocated:
                assert allocated == procs_for_circuit(20)
                seen_running = True
                break
            time.sleep(0.002)
        assert seen_running
        manager.wait(cid, timeout=10)
        manager.scheduler.drain(5)
        assert sum(n.allocated for n in manager.scheduler.utilization().nodes) == 0


class TestRegistry:
    def test_default_listing(self, manager):
        descriptors = manager.list_backends()
        names = {d.name for d in descriptors}
        assert {"statevector", "mock"} <= names
        defaults = [d for d in descriptors if d.default]
        assert len(defaults) == 1
        assert defaults[0].name == "statevector"

    def test_registering_second_mock(self, manager):
        manager.registry.register(MockBackend("slowmock", latency=0.2))
        assert len(manager.list_backends()) == 3

    def test_duplicate_name_rejected(self, manager):
        with pytest.raises(ValidationError, match="already registered"):
            manager.registry.register(StatevectorBackend("mock"))

    def test_explicit_choice_beats_default(self, manager):
        cid = manager.create_circuit(ghz_info(2, backend="mock"))
        _, result, _ = manager.sync_run(cid)
        assert result.stats["backend"] == "mock"

    def test_registry_from_specs(self):
        registry = BackendRegistry()
        registry.register(MockBackend("a"))
        assert registry.get().name == "a"
        with pytest.raises(ValidationError):
            build_registry(["turbo:nope"])


class TestTaskInfo:
    def test_from_mapping_defaults(self):
        info = TaskInfo.from_mapping({"qasm": "OPENQASM 2.0;", "num_qubits": 0,
                                      "num_shots": 3})
        assert info.compiler == ""
        assert info.backend is None
        assert info.seed is None

    def test_compiler_is_opaque_passthrough(self, manager):
        cid = manager.create_circuit(ghz_info(2, shots=1) | {"compiler": "staq"})
        assert manager.get_result(cid).state == "created"
