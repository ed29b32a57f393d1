"""Task queueing and dispatch against the node pool.

The scheduling loop is event driven: a step runs on every enqueue and after
every release, never by polling.  Each step walks a queue in FIFO order,
probes the pool for a first-fit placement and stops at the first head-of-line
block, mirroring the pool's own no-overtaking policy.

Two operating modes exist.  In ``many_job`` every client session shares one
queue and the whole pool.  In ``per_job`` each session gets a dedicated pool
partition with an independent queue; partitions split whole nodes when there
are enough of them, otherwise they split slots within each node, with any
remainder going to the first partition.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .errors import InvalidStateError, ResourceError, ValidationError
from .resources import NodeSpec, NodeUsage, Placement, PoolSnapshot, ResourcePool
from .simulator import ExecutionResult

MANY_JOB = "many_job"
PER_JOB = "per_job"


@dataclass(frozen=True)
class SchedulerMode:
    """Operating mode plus the per-session pool fraction for per_job."""

    mode: str = MANY_JOB
    per_job_partition: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in (MANY_JOB, PER_JOB):
            raise ValueError(f"unknown scheduler mode {self.mode!r}")
        if (self.per_job_partition is not None) != (self.mode == PER_JOB):
            raise ValueError("per_job_partition must be given exactly for per_job mode")
        if self.per_job_partition is not None and not 0 < self.per_job_partition <= 1:
            raise ValueError("per_job_partition must be in (0, 1]")


@dataclass
class EnsembleSpec:
    """Circuits to run repeatedly with their count histograms merged."""

    cids: list[str]
    repetitions: int = 1


@dataclass
class ScheduledTask:
    """Unit of work the scheduler dispatches once a placement is granted.

    ``execute`` runs on a worker thread and must record its own outcome
    rather than raise; ``on_dispatch`` fires under dispatch, before execution.
    """

    cid: str
    procs: int
    execute: Callable[[Placement], None]
    on_dispatch: Callable[[Placement], None] = field(default=lambda placement: None)
    session: str = "default"


class EnsembleError(Exception):
    """Ensemble member failure, with whatever results completed attached."""

    def __init__(self, message: str, partial: ExecutionResult | None = None,
                 failures: list[str] | None = None):
        super().__init__(message)
        self.partial = partial
        self.failures = failures or []


def split_partitions(nodes: tuple[NodeSpec, ...], fraction: float) -> list[list[NodeSpec]]:
    """Cut a node list into floor(1/fraction) disjoint partitions."""
    sessions = int(1.0 / fraction + 1e-9)
    if sessions < 1:
        sessions = 1
    if len(nodes) >= sessions:
        base, remainder = divmod(len(nodes), sessions)
        sizes = [base + remainder] + [base] * (sessions - 1)
        partitions, start = [], 0
        for size in sizes:
            partitions.append(list(nodes[start:start + size]))
            start += size
        return partitions
    partitions = []
    for index in range(sessions):
        share = []
        for node in nodes:
            per = node.slots // sessions
            count = node.slots - per * (sessions - 1) if index == 0 else per
            if count > 0:
                share.append(NodeSpec(node.node_id, count))
        if not share:
            raise ValidationError(
                f"partition fraction {fraction} leaves a session with zero slots"
            )
        partitions.append(share)
    return partitions


class TaskScheduler:
    """Drives queued tasks onto the pool and runs them on worker threads."""

    def __init__(self, pool: ResourcePool, *, max_workers: int | None = None):
        self._root_pool = pool
        self._node_specs = pool.nodes
        self._lock = threading.Lock()
        self._mode = SchedulerMode()
        self._pools: list[ResourcePool] = [pool]
        self._queues: list[deque[ScheduledTask]] = [deque()]
        self._sessions: dict[str, int] = {}
        self._active = 0
        self._idle = threading.Event()
        self._idle.set()
        workers = max_workers if max_workers is not None else max(pool.total_slots, 4)
        self._executor = ThreadPoolExecutor(max_workers=workers)
        pool.add_release_listener(self.schedule_loop_step)

    @property
    def mode(self) -> SchedulerMode:
        return self._mode

    def set_mode(self, mode: SchedulerMode) -> None:
        """Switch operating mode; only legal while no tasks are queued or active."""
        with self._lock:
            if self._active or any(self._queues):
                raise InvalidStateError("cannot change scheduler mode while tasks are active")
            self._mode = mode
            self._sessions = {}
            if mode.mode == MANY_JOB:
                self._pools = [self._root_pool]
                self._queues = [deque()]
            else:
                partitions = split_partitions(self._node_specs, mode.per_job_partition)
                self._pools = [ResourcePool(part) for part in partitions]
                self._queues = [deque() for _ in partitions]
                for pool in self._pools:
                    pool.add_release_listener(self.schedule_loop_step)

    def _partition_for(self, session: str) -> int:
        if self._mode.mode == MANY_JOB:
            return 0
        index = self._sessions.get(session)
        if index is None:
            index = len(self._sessions)
            if index >= len(self._pools):
                raise ResourceError(
                    f"no free pool partition for session {session!r} "
                    f"({len(self._pools)} partitions)"
                )
            self._sessions[session] = index
        return index

    def capacity(self, session: str = "default") -> int:
        """Total slots the given session can ever hold."""
        with self._lock:
            return self._pools[self._partition_for(session)].total_slots

    def submit(self, task: ScheduledTask) -> None:
        """Queue a task and trigger a scheduling step."""
        with self._lock:
            index = self._partition_for(task.session)
            if task.procs > self._pools[index].total_slots:
                raise ResourceError(
                    f"task {task.cid} needs {task.procs} slot(s), over the "
                    f"{self._pools[index].total_slots}-slot capacity"
                )
            self._queues[index].append(task)
            self._idle.clear()
        self.schedule_loop_step()

    def schedule_loop_step(self) -> list[str]:
        """Dispatch queued tasks in FIFO order until the head no longer fits."""
        dispatched: list[str] = []
        launches: list[tuple[ScheduledTask, Placement, ResourcePool]] = []
        with self._lock:
            for pool, queue in zip(self._pools, self._queues):
                while queue:
                    task = queue[0]
                    placement = pool.request(task.procs, queue=False)
                    if placement is None:
                        break
                    queue.popleft()
                    self._active += 1
                    launches.append((task, placement, pool))
                    dispatched.append(task.cid)
        for task, placement, pool in launches:
            task.on_dispatch(placement)
            self._executor.submit(self._run_task, task, placement, pool)
        return dispatched

    def _run_task(self, task: ScheduledTask, placement: Placement, pool: ResourcePool) -> None:
        try:
            task.execute(placement)
        finally:
            # release first (it triggers the next scheduling step via the pool
            # listener), then mark idle, so drain() never observes held slots
            pool.release(placement.instance_id)
            with self._lock:
                self._active -= 1
                if self._active == 0 and not any(self._queues):
                    self._idle.set()

    def queued_tasks(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues)

    def active_tasks(self) -> int:
        with self._lock:
            return self._active

    def utilization(self) -> PoolSnapshot:
        """Aggregate per-node usage across partitions plus queued work."""
        with self._lock:
            snapshots = [pool.utilization() for pool in self._pools]
            queued = sum(len(q) for q in self._queues)
        if len(snapshots) == 1:
            snap = snapshots[0]
            return PoolSnapshot(snap.nodes, snap.queue_length + queued)
        usage = {spec.node_id: [0, 0] for spec in self._node_specs}
        pending = 0
        for snap in snapshots:
            pending += snap.queue_length
            for node in snap.nodes:
                usage[node.node_id][0] += node.allocated
                usage[node.node_id][1] += node.capacity
        nodes = tuple(
            NodeUsage(spec.node_id, usage[spec.node_id][0], usage[spec.node_id][1])
            for spec in self._node_specs
        )
        return PoolSnapshot(nodes, pending + queued)

    def drain(self, timeout: float | None = None) -> bool:
        """Wait until no task is queued or running; False on timeout."""
        return self._idle.wait(timeout)

    def cancel_queued(self, on_cancel: Callable[[ScheduledTask], None]) -> int:
        """Drop every queued task, invoking ``on_cancel`` for each."""
        with self._lock:
            dropped = [task for queue in self._queues for task in queue]
            for queue in self._queues:
                queue.clear()
            if self._active == 0:
                self._idle.set()
        for task in dropped:
            on_cancel(task)
        return len(dropped)

    def shutdown(self, grace: float | None = None) -> None:
        self.drain(grace)
        self.cancel_queued(lambda task: None)
        self._executor.shutdown(wait=False, cancel_futures=True)


def merge_results(results: list[ExecutionResult], elapsed: float) -> ExecutionResult:
    """Merge count histograms by bitstring addition; shots add up."""
    counts: dict[str, int] = {}
    shots = 0
    backends = []
    for result in results:
        shots += result.shots
        for key, value in result.counts.items():
            counts[key] = counts.get(key, 0) + value
        name = result.stats.get("backend")
        if name and name not in backends:
            backends.append(name)
    stats = {
        "wall_time_seconds": elapsed,
        "tasks": len(results),
        "backend": ",".join(backends),
    }
    return ExecutionResult(counts, shots, stats)


def run_ensemble(manager, spec: EnsembleSpec, session: str = "default") -> ExecutionResult:
    """Run every circuit of the ensemble ``repetitions`` times and merge.

    Members run concurrently as scheduling permits.  Repetition k of a seeded
    member derives its seed as seed + k so merged statistics stay meaningful
    while remaining reproducible.  Any member failure raises
    :class:`EnsembleError` carrying the merged partial results.
    """
    if not spec.cids:
        raise ValidationError("ensemble needs at least one circuit")
    if spec.repetitions < 1:
        raise ValidationError("repetitions must be at least 1")
    widths = {manager.circuit(cid).num_clbits for cid in spec.cids}
    if len(widths) > 1:
        raise ValidationError(f"ensemble members must share one clbit width, got {sorted(widths)}")
    for cid in spec.cids:
        state = manager.get_result(cid).state
        if state != "created":
            raise InvalidStateError(f"circuit {cid} is {state}, expected created")

    started = time.perf_counter()
    members = []
    for cid in spec.cids:
        members.append(cid)
        for repetition in range(1, spec.repetitions):
            members.append(manager.clone(cid, seed_offset=repetition))
    for cid in members:
        manager.async_run(cid, session=session)

    results: list[ExecutionResult] = []
    for cid in members:
        handle = manager.wait(cid)
        if handle.state != "done":
            # fail fast: report with whatever completed before the failure
            failure = f"{cid}: {handle.error}"
            merged = merge_results(results, time.perf_counter() - started) if results else None
            raise EnsembleError(f"ensemble member failed ({failure})",
                                partial=merged, failures=[failure])
        results.append(handle.result)
    return merge_results(results, time.perf_counter() - started)
