"""Scheduler: dispatch stepping, modes, partitions and ensemble processing."""

from __future__ import annotations

import threading
import time

import pytest

from qfw.backends import MockBackend, build_registry
from qfw.bench import ghz
from qfw.errors import InvalidStateError, ResourceError, ValidationError
from qfw.qasm import emit
from qfw.qpm import QuantumPlatformManager
from qfw.qtm import (
    EnsembleError,
    EnsembleSpec,
    ScheduledTask,
    SchedulerMode,
    TaskScheduler,
    merge_results,
    run_ensemble,
    split_partitions,
)
from qfw.resources import NodeSpec, ResourcePool
from qfw.simulator import ExecutionResult


class Gate:
    """Task stub whose execution blocks until released by the test."""

    def __init__(self, cid: str, procs: int, session: str = "default"):
        self.cid = cid
        self.procs = procs
        self.session = session
        self.release = threading.Event()
        self.dispatched = threading.Event()
        self.finished = threading.Event()

    def task(self) -> ScheduledTask:
        def execute(placement):
            self.release.wait(5.0)
            self.finished.set()

        return ScheduledTask(self.cid, self.procs, execute,
                             on_dispatch=lambda placement: self.dispatched.set(),
                             session=self.session)


@pytest.fixture
def scheduler():
    pool = ResourcePool([NodeSpec("node1", 8), NodeSpec("node2", 8)])
    sched = TaskScheduler(pool)
    yield sched
    sched.shutdown(grace=2.0)


class TestScheduleLoop:
    def test_prototype_trio_dispatches_in_one_step(self, scheduler):
        stubs = [Gate("t1", 4), Gate("t2", 8), Gate("t3", 4)]
        for stub in stubs:
            scheduler.submit(stub.task())
        for stub in stubs:
            assert stub.dispatched.wait(2.0)
        assert sum(n.allocated for n in scheduler.utilization().nodes) == 16
        for stub in stubs:
            stub.release.set()
        assert scheduler.drain(5.0)

    def test_fourth_task_waits_for_a_release(self, scheduler):
        stubs = [Gate("t1", 4), Gate("t2", 8), Gate("t3", 4)]
        for stub in stubs:
            scheduler.submit(stub.task())
        fourth = Gate("t4", 4)
        scheduler.submit(fourth.task())
        assert not fourth.dispatched.wait(0.1)
        assert scheduler.utilization().queue_length == 1
        stubs[1].release.set()
        assert fourth.dispatched.wait(2.0)
        for stub in stubs + [fourth]:
            stub.release.set()
        assert scheduler.drain(5.0)

    def test_empty_queue_step_dispatches_nothing(self, scheduler):
        assert scheduler.schedule_loop_step() == []

    def test_one_release_dispatches_whole_backlog(self, scheduler):
        # saturate the pool behind the scheduler's back, queue the 4/8/4 trio,
        # then free everything: the single release-driven step takes all three
        blocker = scheduler._root_pool.request(16)
        stubs = [Gate("t1", 4), Gate("t2", 8), Gate("t3", 4)]
        for stub in stubs:
            scheduler.submit(stub.task())
            stub.release.set()
        assert scheduler.utilization().queue_length == 3
        assert not stubs[0].dispatched.wait(0.05)
        scheduler._root_pool.release(blocker.instance_id)
        for stub in stubs:
            assert stub.dispatched.wait(2.0)
        assert scheduler.drain(5.0)

    def test_fifo_dispatch_order(self, scheduler):
        order = []
        lock = threading.Lock()
        done = []

        def make(cid):
            def execute(placement):
                with lock:
                    order.append(cid)
            return ScheduledTask(cid, 16, execute)

        for i in range(5):
            scheduler.submit(make(f"t{i}"))
            done.append(f"t{i}")
        assert scheduler.drain(10.0)
        assert order == done

    def test_oversized_submit_rejected(self, scheduler):
        with pytest.raises(ResourceError):
            scheduler.submit(Gate("huge", 17).task())

    def test_pool_returns_to_free_after_quiescence(self, scheduler):
        stubs = [Gate(f"t{i}", 3) for i in range(7)]
        for stub in stubs:
            scheduler.submit(stub.task())
            stub.release.set()
        assert scheduler.drain(10.0)
        snapshot = scheduler.utilization()
        assert snapshot.free_slots == snapshot.total_slots
        assert snapshot.queue_length == 0


class TestModes:
    def test_mode_validation(self):
        with pytest.raises(ValueError):
            SchedulerMode("sometimes")
        with pytest.raises(ValueError):
            SchedulerMode("many_job", per_job_partition=0.5)
        with pytest.raises(ValueError):
            SchedulerMode("per_job")
        with pytest.raises(ValueError):
            SchedulerMode("per_job", per_job_partition=1.5)

    def test_split_whole_nodes(self):
        nodes = (NodeSpec("n1", 8), NodeSpec("n2", 8))
        parts = split_partitions(nodes, 0.5)
        assert [[n.node_id for n in part] for part in parts] == [["n1"], ["n2"]]
        assert all(sum(n.slots for n in part) == 8 for part in parts)

    def test_split_slots_within_one_node(self):
        parts = split_partitions((NodeSpec("solo", 7),), 0.5)
        assert [part[0].slots for part in parts] == [4, 3]  # remainder to the first

    def test_split_remainder_nodes_to_first(self):
        nodes = tuple(NodeSpec(f"n{i}", 4) for i in range(5))
        parts = split_partitions(nodes, 0.5)
        assert [len(part) for part in parts] == [3, 2]

    def test_per_job_sessions_get_dedicated_partitions(self, scheduler):
        scheduler.set_mode(SchedulerMode("per_job", per_job_partition=0.5))
        assert scheduler.capacity("alice") == 8
        assert scheduler.capacity("bob") == 8
        with pytest.raises(ResourceError, match="no free pool partition"):
            scheduler.capacity("carol")

    def test_per_job_isolation(self, scheduler):
        scheduler.set_mode(SchedulerMode("per_job", per_job_partition=0.5))
        alice = Gate("a1", 8, session="alice")
        scheduler.submit(alice.task())
        assert alice.dispatched.wait(2.0)
        # alice's partition is saturated; bob still dispatches instantly
        bob = Gate("b1", 8, session="bob")
        scheduler.submit(bob.task())
        assert bob.dispatched.wait(2.0)
        # a second alice task cannot steal bob's slots
        alice2 = Gate("a2", 4, session="alice")
        scheduler.submit(alice2.task())
        assert not alice2.dispatched.wait(0.1)
        alice.release.set()
        assert alice2.dispatched.wait(2.0)
        for stub in (alice2, bob):
            stub.release.set()
        assert scheduler.drain(5.0)

    def test_per_job_oversized_for_partition(self, scheduler):
        scheduler.set_mode(SchedulerMode("per_job", per_job_partition=0.5))
        with pytest.raises(ResourceError):
            scheduler.submit(Gate("big", 9, session="alice").task())

    def test_many_job_shares_one_fifo(self, scheduler):
        order = []
        lock = threading.Lock()

        def make(cid, session):
            def execute(placement):
                with lock:
                    order.append(cid)
            return ScheduledTask(cid, 16, execute, session=session)

        scheduler.submit(make("a1", "alice"))
        scheduler.submit(make("b1", "bob"))
        scheduler.submit(make("a2", "alice"))
        assert scheduler.drain(10.0)
        assert order == ["a1", "b1", "a2"]

    def test_mode_change_with_active_tasks_is_an_error(self, scheduler):
        stub = Gate("t1", 2)
        scheduler.submit(stub.task())
        assert stub.dispatched.wait(2.0)
        with pytest.raises(InvalidStateError):
            scheduler.set_mode(SchedulerMode("per_job", per_job_partition=0.5))
        stub.release.set()
        assert scheduler.drain(5.0)
        scheduler.set_mode(SchedulerMode("per_job", per_job_partition=0.5))
        scheduler.set_mode(SchedulerMode("many_job"))


@pytest.fixture
def manager():
    pool = ResourcePool([NodeSpec("node1", 8), NodeSpec("node2", 8)])
    sched = TaskScheduler(pool)
    mgr = QuantumPlatformManager(sched, build_registry(["statevector", "mock:0.01"]))
    yield mgr
    sched.shutdown(grace=5.0)


def ghz_info(n: int, shots: int, **extra) -> dict:
    return {"qasm": emit(ghz(n)), "num_qubits": n, "num_shots": shots,
            "compiler": ""} | extra


class TestEnsemble:
    def test_merge_is_bitstringwise_addition(self):
        merged = merge_results(
            [ExecutionResult({"00": 3, "11": 5}, 8, {"backend": "statevector"}),
             ExecutionResult({"11": 2, "01": 6}, 8, {"backend": "statevector"})],
            elapsed=0.5,
        )
        assert merged.counts == {"00": 3, "11": 7, "01": 6}
        assert merged.shots == 16
        assert merged.stats["tasks"] == 2

    def test_ghz_two_repetitions(self, manager):
        cid = manager.create_circuit(ghz_info(3, shots=512, seed=9))
        merged = run_ensemble(manager, EnsembleSpec([cid], repetitions=2))
        assert merged.shots == 1024
        assert set(merged.counts) <= {"000", "111"}

    def test_singleton_ensemble_equals_sync_run(self, manager):
        solo = manager.create_circuit(ghz_info(3, shots=256, seed=4))
        _, sync_result, _ = manager.sync_run(solo)
        member = manager.create_circuit(ghz_info(3, shots=256, seed=4))
        merged = run_ensemble(manager, EnsembleSpec([member], repetitions=1))
        assert merged.counts == sync_result.counts
        assert merged.shots == sync_result.shots

    def test_width_mismatch_rejected(self, manager):
        a = manager.create_circuit(ghz_info(2, shots=16))
        b = manager.create_circuit(ghz_info(3, shots=16))
        with pytest.raises(ValidationError, match="clbit width"):
            run_ensemble(manager, EnsembleSpec([a, b]))

    def test_member_must_be_fresh(self, manager):
        cid = manager.create_circuit(ghz_info(2, shots=16))
        manager.sync_run(cid)
        with pytest.raises(InvalidStateError):
            run_ensemble(manager, EnsembleSpec([cid]))

    def test_empty_spec_rejected(self, manager):
        with pytest.raises(ValidationError):
            run_ensemble(manager, EnsembleSpec([]))
        cid = manager.create_circuit(ghz_info(2, shots=16))
        with pytest.raises(ValidationError):
            run_ensemble(manager, EnsembleSpec([cid], repetitions=0))

    def test_failure_carries_partial_results(self, manager):
        manager.registry.register(MockBackend("brittle", failure="flaky hardware"))
        good = manager.create_circuit(ghz_info(2, shots=64, seed=1))
        bad = manager.create_circuit(ghz_info(2, shots=64, backend="brittle"))
        with pytest.raises(EnsembleError) as excinfo:
            run_ensemble(manager, EnsembleSpec([good, bad]))
        assert excinfo.value.partial is not None
        assert excinfo.value.partial.shots == 64
        assert excinfo.value.failures

    def test_members_run_concurrently(self, manager):
        cids = [manager.create_circuit(ghz_info(2, shots=1, backend="mock"))
                for _ in range(8)]
        started = time.perf_counter()
        merged = run_ensemble(manager, EnsembleSpec(cids, repetitions=2))
        elapsed = time.perf_counter() - started
        assert merged.shots == 16
        # 16 one-slot mock tasks of 10 ms on 16 slots: far below the serial 160 ms
        assert elapsed < 0.12
