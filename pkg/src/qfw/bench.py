"""Benchmark workloads and the sequential-vs-concurrent campaign harness.

The GHZ generator puts a Hadamard on qubit 0, chains CNOTs down the register
and measures every qubit to its own clbit.  The campaign harness is a plain
wire-protocol client: sequential mode awaits each task before submitting the
next, concurrent mode submits everything via async_run and polls.  Absolute
timings depend on the backend; the harness itself only reports them.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, GateKind
from .qasm import emit


def ghz(num_qubits: int) -> Circuit:
    """n-qubit GHZ preparation plus full measurement."""
    if num_qubits < 1:
        raise ValueError("a GHZ circuit needs at least one qubit")
    circuit = Circuit(num_qubits, num_qubits, name=f"ghz-{num_qubits}")
    circuit.h(0)
    for k in range(1, num_qubits):
        circuit.cx(k - 1, k)
    return circuit.measure_all()


_RANDOM_1Q = [
    GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.SDG,
    GateKind.T, GateKind.TDG, GateKind.ID, GateKind.RX, GateKind.RY, GateKind.RZ,
    GateKind.U1, GateKind.U2, GateKind.U3,
]
_RANDOM_2Q = [GateKind.CX, GateKind.CZ, GateKind.SWAP]


def random_circuit(num_qubits: int, depth: int, seed: int = 0) -> Circuit:
    """Deterministic-from-seed layered circuit with no measurements."""
    if num_qubits < 1:
        raise ValueError("num_qubits must be at least 1")
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    rng = np.random.default_rng(seed)
    circuit = Circuit(num_qubits, 0, name=f"random-{num_qubits}x{depth}-s{seed}")
    for _ in range(depth):
        order = [int(q) for q in rng.permutation(num_qubits)]
        i = 0
        while i < len(order):
            remaining = len(order) - i
            roll = rng.random()
            if remaining >= 3 and roll < 0.1:
                circuit.ccx(order[i], order[i + 1], order[i + 2])
                i += 3
            elif remaining >= 2 and roll < 0.45:
                kind = _RANDOM_2Q[int(rng.integers(len(_RANDOM_2Q)))]
                circuit._add(kind, (order[i], order[i + 1]))
                i += 2
            else:
                kind = _RANDOM_1Q[int(rng.integers(len(_RANDOM_1Q)))]
                params = tuple(float(a) for a in rng.uniform(0, 2 * np.pi, kind.num_params))
                circuit._add(kind, (order[i],), params=params)
                i += 1
    return circuit


@dataclass
class BenchReport:
    """Wall-clock observations for one campaign."""

    workload: str
    tasks: int
    mode: str
    wall_time_seconds: float
    per_task_seconds: list[float]

    def to_dict(self) -> dict:
        return {
            "workload": self.workload,
            "tasks": self.tasks,
            "mode": self.mode,
            "wall_time_seconds": self.wall_time_seconds,
            "per_task_seconds": list(self.per_task_seconds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_table(self) -> str:
        lines = [
            f"workload            {self.workload}",
            f"mode                {self.mode}",
            f"tasks               {self.tasks}",
            f"wall time (s)       {self.wall_time_seconds:.3f}",
        ]
        for i, seconds in enumerate(self.per_task_seconds):
            lines.append(f"  task {i:<3d}          {seconds:.3f}")
        return "\n".join(lines)


class CampaignError(Exception):
    """A task failed mid-campaign; the partial report rides along."""

    def __init__(self, message: str, report: BenchReport):
        super().__init__(message)
        self.report = report


def run_campaign(client, circuit: Circuit, count: int, *, concurrent: bool = False,
                 backend: str | None = None, shots: int = 1, seed: int | None = None,
                 poll_interval: float = 0.01) -> BenchReport:
    """Submit ``count`` copies of a circuit and time them to completion."""
    if count < 1:
        raise ValueError("count must be at least 1")
    info = {
        "qasm": emit(circuit),
        "num_qubits": circuit.num_qubits,
        "num_shots": shots,
        "compiler": "",
    }
    if backend is not None:
        info["backend"] = backend
    if seed is not None:
        info["seed"] = seed

    mode = "concurrent" if concurrent else "sequential"
    per_task: list[float] = []
    campaign_start = time.perf_counter()

    def partial() -> BenchReport:
        return BenchReport(circuit.name, count, mode,
                           time.perf_counter() - campaign_start, per_task)

    if not concurrent:
        for _ in range(count):
            task_start = time.perf_counter()
            cid = client.create_circuit(info)
            rc, _, _ = client.sync_run(cid)
            if rc != 0:
                raise CampaignError(f"task {cid} failed with rc={rc}", partial())
            per_task.append(time.perf_counter() - task_start)
        return BenchReport(circuit.name, count, mode,
                           time.perf_counter() - campaign_start, per_task)

    cids = [client.create_circuit(info) for _ in range(count)]
    starts = {}
    for cid in cids:
        starts[cid] = time.perf_counter()
        client.async_run(cid)
    ends: dict[str, float] = {}
    while len(ends) < count:
        for cid in cids:
            if cid in ends:
                continue
            snapshot = client.get_result(cid)
            if snapshot["state"] == "done":
                ends[cid] = time.perf_counter()
            elif snapshot["state"] == "failed":
                per_task.extend(ends[c] - starts[c] for c in cids if c in ends)
                raise CampaignError(f"task {cid} failed: {snapshot['error']}", partial())
        if len(ends) < count:
            time.sleep(poll_interval)
    wall = time.perf_counter() - campaign_start
    per_task.extend(ends[cid] - starts[cid] for cid in cids)
    return BenchReport(circuit.name, count, mode, wall, per_task)
