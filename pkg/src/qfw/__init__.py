"""Orchestration for quantum-circuit simulation tasks on a modeled node pool.

The package parses OpenQASM 2.0 into a flat gate-level IR, simulates it on an
exact state-vector backend, sizes and places simulator instances on a modeled
pool of compute nodes, and exposes the whole pipeline over a line-delimited
JSON wire protocol plus a CLI.
"""

from .backends import BackendDescriptor, BackendRegistry, MockBackend, StatevectorBackend, build_registry
from .bench import BenchReport, CampaignError, ghz, random_circuit, run_campaign
from .circuit import Circuit, GateKind, Instruction, validate
from .client import ServerError, ServiceClient
from .errors import (
    BackendError,
    InvalidStateError,
    QfwError,
    ResourceError,
    UnknownMethodError,
    ValidationError,
)
from .qasm import ParseError, emit, parse
from .qpm import CircuitHandle, QuantumPlatformManager, TaskInfo, procs_for_circuit
from .qtm import (
    EnsembleError,
    EnsembleSpec,
    ScheduledTask,
    SchedulerMode,
    TaskScheduler,
    merge_results,
    run_ensemble,
)
from .resources import NodeSpec, Placement, PoolSnapshot, QueuedRequest, ResourcePool
from .service import DEFAULT_PORT, QfwServer, ServerConfig, serve
from .simulator import (
    ExecutionResult,
    SimConfig,
    StateVector,
    apply_gate,
    final_amplitudes,
    gate_matrix,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendError",
    "BackendRegistry",
    "BenchReport",
    "CampaignError",
    "Circuit",
    "CircuitHandle",
    "DEFAULT_PORT",
    "EnsembleError",
    "EnsembleSpec",
    "ExecutionResult",
    "GateKind",
    "Instruction",
    "InvalidStateError",
    "MockBackend",
    "NodeSpec",
    "ParseError",
    "Placement",
    "PoolSnapshot",
    "QfwError",
    "QfwServer",
    "QuantumPlatformManager",
    "QueuedRequest",
    "ResourceError",
    "ResourcePool",
    "ScheduledTask",
    "SchedulerMode",
    "ServerConfig",
    "ServerError",
    "ServiceClient",
    "SimConfig",
    "StateVector",
    "StatevectorBackend",
    "TaskInfo",
    "TaskScheduler",
    "UnknownMethodError",
    "ValidationError",
    "apply_gate",
    "build_registry",
    "emit",
    "final_amplitudes",
    "gate_matrix",
    "ghz",
    "merge_results",
    "parse",
    "procs_for_circuit",
    "random_circuit",
    "run",
    "run_campaign",
    "run_ensemble",
    "serve",
    "validate",
]
