"""Modeled compute-node pool: slot accounting, first-fit placement, FIFO wait queue.

One slot stands for one bound simulator process on a node.  Placement walks
nodes in declaration order and takes ``min(free, remaining)`` from each, so an
instance may span nodes.  Waiting requests form a strict FIFO with
head-of-line blocking: a later request never overtakes an earlier one, even
if it would fit.  All mutations serialize through one lock, so callers from
any number of threads observe linearizable request/release/utilization.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass

from .errors import ResourceError


@dataclass(frozen=True)
class NodeSpec:
    """A modeled compute node with a fixed number of process slots."""

    node_id: str
    slots: int = 8

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError(f"node {self.node_id!r} must have at least one slot")


@dataclass(frozen=True)
class Placement:
    """Assignment of an instance's processes to node slots."""

    instance_id: str
    assignment: tuple[tuple[str, int], ...]

    @property
    def total_procs(self) -> int:
        return sum(count for _, count in self.assignment)


@dataclass(frozen=True)
class NodeUsage:
    node_id: str
    allocated: int
    capacity: int


@dataclass(frozen=True)
class PoolSnapshot:
    """Consistent view of per-node usage plus the wait-queue length."""

    nodes: tuple[NodeUsage, ...]
    queue_length: int

    @property
    def total_slots(self) -> int:
        return sum(n.capacity for n in self.nodes)

    @property
    def free_slots(self) -> int:
        return sum(n.capacity - n.allocated for n in self.nodes)


class QueuedRequest:
    """Ticket for a request waiting in the pool's FIFO queue.

    ``position`` is the queue position observed at enqueue time.  The ticket
    is granted by a later release; ``wait`` blocks until then.
    """

    def __init__(self, procs: int, position: int):
        self.procs = procs
        self.position = position
        self._event = threading.Event()
        self._placement: Placement | None = None

    @property
    def granted(self) -> bool:
        return self._event.is_set()

    @property
    def placement(self) -> Placement | None:
        return self._placement

    def wait(self, timeout: float | None = None) -> Placement:
        if not self._event.wait(timeout):
            raise TimeoutError(f"request for {self.procs} slot(s) still queued")
        assert self._placement is not None
        return self._placement

    def _grant(self, placement: Placement) -> None:
        self._placement = placement


class ResourcePool:
    """The persistent resource view: tracks every slot of every node."""

    def __init__(self, nodes: list[NodeSpec] | tuple[NodeSpec, ...]):
        nodes = tuple(nodes)
        if not nodes:
            raise ValueError("pool needs at least one node")
        ids = [n.node_id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("node ids must be unique")
        self._nodes = nodes
        self._allocated = {n.node_id: 0 for n in nodes}
        self._placements: dict[str, Placement] = {}
        self._pending: deque[QueuedRequest] = deque()
        self._lock = threading.Lock()
        self._release_listeners: list = []
        self._next_instance = 0

    @property
    def nodes(self) -> tuple[NodeSpec, ...]:
        return self._nodes

    @property
    def total_slots(self) -> int:
        return sum(n.slots for n in self._nodes)

    def free_slots(self) -> int:
        with self._lock:
            return self._free_locked()

    def _free_locked(self) -> int:
        return self.total_slots - sum(self._allocated.values())

    def _place_locked(self, procs: int) -> Placement:
        assignment = []
        remaining = procs
        for node in self._nodes:
            free = node.slots - self._allocated[node.node_id]
            take = min(free, remaining)
            if take > 0:
                assignment.append((node.node_id, take))
                self._allocated[node.node_id] += take
                remaining -= take
            if remaining == 0:
                break
        assert remaining == 0
        self._next_instance += 1
        placement = Placement(f"inst-{self._next_instance}", tuple(assignment))
        self._placements[placement.instance_id] = placement
        return placement

    def request(self, procs: int, *, queue: bool = True) -> Placement | QueuedRequest | None:
        """First-fit placement of ``procs`` slots, or a FIFO wait ticket.

        A request larger than the whole pool can never be satisfied and is
        rejected outright.  With ``queue=False`` an unsatisfiable request
        returns None instead of enqueueing (used by the scheduler's probe).
        """
        if procs < 1:
            raise ValueError("procs must be at least 1")
        with self._lock:
            if procs > self.total_slots:
                raise ResourceError(
                    f"request for {procs} slot(s) exceeds pool capacity {self.total_slots}"
                )
            if not self._pending and self._free_locked() >= procs:
                return self._place_locked(procs)
            if not queue:
                return None
            ticket = QueuedRequest(procs, len(self._pending))
            self._pending.append(ticket)
            return ticket

    def release(self, instance_id: str) -> dict[str, int]:
        """Return an instance's slots and grant now-satisfiable queue heads.

        Grants strictly from the head: the scan stops at the first pending
        request that still does not fit (no overtaking).
        """
        granted: list[QueuedRequest] = []
        with self._lock:
            placement = self._placements.pop(instance_id, None)
            if placement is None:
                raise KeyError(f"unknown instance {instance_id!r}")
            freed = {}
            for node_id, count in placement.assignment:
                self._allocated[node_id] -= count
                freed[node_id] = count
            while self._pending and self._pending[0].procs <= self._free_locked():
                ticket = self._pending.popleft()
                ticket._grant(self._place_locked(ticket.procs))
                granted.append(ticket)
            listeners = list(self._release_listeners)
        for ticket in granted:
            ticket._event.set()
        for listener in listeners:
            listener()
        return freed

    def utilization(self) -> PoolSnapshot:
        with self._lock:
            nodes = tuple(
                NodeUsage(n.node_id, self._allocated[n.node_id], n.slots) for n in self._nodes
            )
            return PoolSnapshot(nodes, len(self._pending))

    def add_release_listener(self, listener) -> None:
        """Register a callback fired (outside the lock) after each release."""
        with self._lock:
            self._release_listeners.append(listener)
