"""Pluggable execution backends and their registry.

Two backends ship by default: the exact state-vector simulator and a mock
with configurable latency for scheduling and timing experiments.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .circuit import Circuit
from .errors import ValidationError
from .simulator import ExecutionResult, SimConfig, run as run_statevector


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    kind: str
    max_qubits: int
    default: bool

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "max_qubits": self.max_qubits,
                "default": self.default}


class StatevectorBackend:
    """Exact dense simulation via :mod:`qfw.simulator`."""

    kind = "statevector"

    def __init__(self, name: str = "statevector", max_qubits: int = 24):
        self.name = name
        self.max_qubits = max_qubits

    def run(self, circuit: Circuit, shots: int, *, workers: int = 1,
            seed: int | None = None) -> ExecutionResult:
        config = SimConfig(max_qubits=self.max_qubits, workers=workers, seed=seed)
        result = run_statevector(circuit, shots, config)
        result.stats["backend"] = self.name
        return result


class MockBackend:
    """Latency-only stand-in for a real platform.

    Sleeps for the configured latency and reports every shot in the all-zero
    bitstring.  ``failure`` forces every run to raise, for failure-path tests.
    """

    kind = "mock"

    def __init__(self, name: str = "mock", latency: float = 0.0, max_qubits: int = 64,
                 failure: str | None = None):
        self.name = name
        self.latency = latency
        self.max_qubits = max_qubits
        self.failure = failure

    def run(self, circuit: Circuit, shots: int, *, workers: int = 1,
            seed: int | None = None) -> ExecutionResult:
        started = time.perf_counter()
        if self.failure is not None:
            raise RuntimeError(self.failure)
        if self.latency > 0:
            time.sleep(self.latency)
        counts = {"0" * circuit.num_clbits: shots}
        stats = {
            "wall_time_seconds": time.perf_counter() - started,
            "backend": self.name,
            "workers": workers,
            "num_qubits": circuit.num_qubits,
        }
        return ExecutionResult(counts, shots, stats)


class BackendRegistry:
    """Named backends with one flagged as the default."""

    def __init__(self):
        self._backends: dict[str, object] = {}
        self._default: str | None = None

    def register(self, backend, *, default: bool = False) -> None:
        if backend.name in self._backends:
            raise ValidationError(f"backend {backend.name!r} already registered")
        self._backends[backend.name] = backend
        if default or self._default is None:
            self._default = backend.name

    def get(self, name: str | None = None):
        if name is None:
            name = self._default
        backend = self._backends.get(name)
        if backend is None:
            raise ValidationError(f"unknown backend {name!r}")
        return backend

    def descriptors(self) -> list[BackendDescriptor]:
        return [
            BackendDescriptor(b.name, b.kind, b.max_qubits, b.name == self._default)
            for b in self._backends.values()
        ]


def build_registry(specs: list[str] | None = None) -> BackendRegistry:
    """Build a registry from spec strings.

    Each spec is ``statevector``, ``mock``, ``mock:LATENCY`` or
    ``NAME=KIND[:LATENCY]``; None gives the shipped default pair with the
    state-vector backend flagged default.
    """
    registry = BackendRegistry()
    if specs is None:
        specs = ["statevector", "mock"]
    for spec in specs:
        name, _, rest = spec.partition("=")
        if not rest:
            name, rest = "", spec
        kind, _, option = rest.partition(":")
        if kind == "statevector":
            backend = StatevectorBackend(name or "statevector")
        elif kind == "mock":
            latency = float(option) if option else 0.0
            backend = MockBackend(name or "mock", latency=latency)
        else:
            raise ValidationError(f"unknown backend kind {kind!r} in spec {spec!r}")
        registry.register(backend, default=(backend.kind == "statevector"))
    return registry
