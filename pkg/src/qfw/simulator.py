"""Reference dense state-vector backend.

The amplitude array is a single dense complex128 vector; worker parallelism
partitions the amplitude index space into contiguous blocks and joins between
gates, so results are bit-identical for any worker count.  Measurement
sampling uses inverse-CDF draws from a counter-based RNG (Philox) keyed by
(seed, shot index), which makes counts reproducible independent of worker
count and of how many shots are drawn.

Bit ordering: qubit 0 is the least-significant bit of the amplitude index.
Bitstring keys in a result are clbit-ordered with clbit 0 rightmost.
"""

from __future__ import annotations

import cmath
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuit import Circuit, GateKind, Instruction
from .circuit import validate as validate_circuit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)

_FIXED_1Q = {
    GateKind.ID: np.eye(2, dtype=complex),
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
    GateKind.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _INV_SQRT2,
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.SDG: np.array([[1, 0], [0, -1j]], dtype=complex),
    GateKind.T: np.array([[1, 0], [0, cmath.exp(0.25j * math.pi)]], dtype=complex),
    GateKind.TDG: np.array([[1, 0], [0, cmath.exp(-0.25j * math.pi)]], dtype=complex),
}


def _u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array(
        [
            [c, -cmath.exp(1j * lam) * s],
            [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
        ],
        dtype=complex,
    )


def _permutation(dim: int, mapping: dict[int, int]) -> np.ndarray:
    mat = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        mat[mapping.get(col, col), col] = 1.0
    return mat


# Multi-qubit matrices follow the local-bit convention: position j in the
# instruction's qubit list is bit j of the local basis index.
_CX = _permutation(4, {1: 3, 3: 1})
_SWAP = _permutation(4, {1: 2, 2: 1})
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_CCX = _permutation(8, {3: 7, 7: 3})


def gate_matrix(kind: GateKind, params: tuple[float, ...] = ()) -> np.ndarray:
    """Unitary matrix for a gate kind in the local-bit convention."""
    if kind in _FIXED_1Q:
        return _FIXED_1Q[kind]
    if kind is GateKind.RX:
        (theta,) = params
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RY:
        (theta,) = params
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind is GateKind.RZ:
        (theta,) = params
        return np.array(
            [[cmath.exp(-0.5j * theta), 0], [0, cmath.exp(0.5j * theta)]], dtype=complex
        )
    if kind is GateKind.U1:
        (lam,) = params
        return np.array([[1, 0], [0, cmath.exp(1j * lam)]], dtype=complex)
    if kind is GateKind.U2:
        phi, lam = params
        return _u3_matrix(math.pi / 2.0, phi, lam)
    if kind is GateKind.U3:
        return _u3_matrix(*params)
    if kind is GateKind.CX:
        return _CX
    if kind is GateKind.CZ:
        return _CZ
    if kind is GateKind.SWAP:
        return _SWAP
    if kind is GateKind.CCX:
        return _CCX
    raise ValueError(f"no unitary for instruction kind {kind.value!r}")


@dataclass
class SimConfig:
    """Execution limits and knobs for the state-vector backend."""

    max_qubits: int = 24
    workers: int = 1
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.max_qubits < 1:
            raise ValueError("max_qubits must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class StateVector:
    """2**num_qubits complex amplitudes; qubit 0 is the index LSB."""

    num_qubits: int
    amplitudes: np.ndarray

    @classmethod
    def zero(cls, num_qubits: int) -> "StateVector":
        amp = np.zeros(1 << num_qubits, dtype=complex)
        amp[0] = 1.0
        return cls(num_qubits, amp)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass
class ExecutionResult:
    """Bitstring-count histogram plus execution statistics."""

    counts: dict[str, int]
    shots: int
    stats: dict[str, float | int | str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "shots": self.shots, "stats": dict(self.stats)}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExecutionResult":
        return cls(dict(data["counts"]), int(data["shots"]), dict(data.get("stats", {})))


def _chunk_bounds(total: int, workers: int) -> list[tuple[int, int]]:
    bounds = [(i * total // workers, (i + 1) * total // workers) for i in range(workers)]
    return [(lo, hi) for lo, hi in bounds if hi > lo]


class _Engine:
    """Applies gate matrices to an amplitude array, optionally with workers."""

    def __init__(self, num_qubits: int, workers: int = 1,
                 pool: ThreadPoolExecutor | None = None):
        self.num_qubits = num_qubits
        self.workers = workers
        self.pool = pool

    def _run_chunks(self, work, total: int) -> None:
        if self.pool is None or self.workers <= 1 or total < 2:
            work(0, total)
            return
        futures = [self.pool.submit(work, lo, hi)
                   for lo, hi in _chunk_bounds(total, self.workers)]
        for future in futures:
            future.result()

    def apply(self, amp: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...]) -> None:
        if len(qubits) == 1:
            self._apply_single(amp, mat, qubits[0])
        else:
            self._apply_multi(amp, mat, qubits)

    def _apply_single(self, amp: np.ndarray, mat: np.ndarray, qubit: int) -> None:
        view = amp.reshape(-1, 2, 1 << qubit)
        m00, m01, m10, m11 = mat[0, 0], mat[0, 1], mat[1, 0], mat[1, 1]

        def work(lo: int, hi: int) -> None:
            a0 = view[lo:hi, 0].copy()
            a1 = view[lo:hi, 1]
            view[lo:hi, 0] = m00 * a0 + m01 * a1
            view[lo:hi, 1] = m10 * a0 + m11 * a1

        self._run_chunks(work, view.shape[0])

    def _apply_multi(self, amp: np.ndarray, mat: np.ndarray, qubits: tuple[int, ...]) -> None:
        n, k = self.num_qubits, len(qubits)
        rest = [q for q in range(n) if q not in qubits]
        m = np.arange(1 << len(rest), dtype=np.intp)
        base = np.zeros_like(m)
        for j, pos in enumerate(rest):
            base |= ((m >> j) & 1) << pos
        dim = 1 << k
        offsets = np.array(
            [sum(((local >> j) & 1) << qubits[j] for j in range(k)) for local in range(dim)],
            dtype=np.intp,
        )

        def work(lo: int, hi: int) -> None:
            idx = offsets[:, None] + base[lo:hi][None, :]
            sub = amp[idx]
            out = np.zeros_like(sub)
            # Explicit row accumulation keeps the arithmetic order independent
            # of the chunk size, so any worker count gives identical bits.
            for row in range(dim):
                acc = out[row]
                for col in range(dim):
                    coeff = mat[row, col]
                    if coeff != 0:
                        acc = acc + coeff * sub[col]
                out[row] = acc
            amp[idx] = out

        self._run_chunks(work, base.size)


def apply_gate(state: StateVector, instr: Instruction, workers: int = 1) -> StateVector:
    """Apply one unitary instruction to the state in place and return it."""
    if not instr.kind.is_unitary:
        raise ValueError(f"{instr.kind.value} is not a unitary instruction")
    arity = instr.kind.num_qubits
    if arity is not None and len(instr.qubits) != arity:
        raise ValueError(f"{instr.kind.value} expects {arity} qubit(s)")
    if len(set(instr.qubits)) != len(instr.qubits):
        raise ValueError("duplicate qubit operand")
    for q in instr.qubits:
        if not 0 <= q < state.num_qubits:
            raise ValueError(f"qubit {q} out of range for {state.num_qubits}-qubit state")
    mat = gate_matrix(instr.kind, instr.params)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            _Engine(state.num_qubits, workers, pool).apply(state.amplitudes, mat, instr.qubits)
    else:
        _Engine(state.num_qubits).apply(state.amplitudes, mat, instr.qubits)
    return state


def _shot_rng(seed: int, shot: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, shot], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


def _bitstring(clbits: list[int]) -> str:
    # clbit 0 is the rightmost character
    return "".join(str(b) for b in reversed(clbits))


def _split_terminal(circuit: Circuit) -> int | None:
    """Index where per-shot execution must begin, or None when the final
    measurements can be sampled from one deterministic state."""
    first = None
    for i, instr in enumerate(circuit.instructions):
        if instr.kind in (GateKind.MEASURE, GateKind.RESET):
            first = i
            break
    if first is None:
        return None
    for instr in circuit.instructions[first:]:
        if instr.kind not in (GateKind.MEASURE, GateKind.BARRIER):
            return first
    return None


def _measure_qubit(amp: np.ndarray, qubit: int, rng: np.random.Generator) -> int:
    """Sample one qubit, collapse the state in place, return the outcome."""
    view = amp.reshape(-1, 2, 1 << qubit)
    p1 = float(np.sum(np.abs(view[:, 1, :]) ** 2))
    outcome = 1 if rng.random() < p1 else 0
    p = p1 if outcome == 1 else 1.0 - p1
    view[:, 1 - outcome, :] = 0.0
    amp /= math.sqrt(p)
    return outcome


def _reset_qubit(amp: np.ndarray, qubit: int, rng: np.random.Generator) -> None:
    outcome = _measure_qubit(amp, qubit, rng)
    if outcome == 1:
        view = amp.reshape(-1, 2, 1 << qubit)
        view[:, 0, :] = view[:, 1, :]
        view[:, 1, :] = 0.0


def run(circuit: Circuit, shots: int, config: SimConfig | None = None) -> ExecutionResult:
    """Execute a circuit and sample its measurements ``shots`` times.

    Terminal measurements are sampled from the final distribution without
    re-executing the circuit; a measure or reset followed by further gates
    forces per-shot execution of that instruction suffix.  Identical
    (circuit, shots, seed, workers) inputs give identical counts, and counts
    are identical across worker counts for a fixed seed.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    config = config or SimConfig()
    if circuit.num_qubits > config.max_qubits:
        raise ValueError(
            f"circuit needs {circuit.num_qubits} qubits, over the "
            f"{config.max_qubits}-qubit budget"
        )
    problems = validate_circuit(circuit)
    if problems:
        raise ValueError(f"invalid circuit: {problems[0]}")

    started = time.perf_counter()
    seed = config.seed if config.seed is not None else _fresh_seed()
    split = _split_terminal(circuit)

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        engine = _Engine(circuit.num_qubits, config.workers, pool)
        if split is None:
            counts = _run_sampled(circuit, shots, seed, engine)
        else:
            counts = _run_trajectories(circuit, shots, seed, engine, split)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)

    stats = {
        "wall_time_seconds": time.perf_counter() - started,
        "backend": "statevector",
        "workers": config.workers,
        "num_qubits": circuit.num_qubits,
    }
    return ExecutionResult(counts, shots, stats)


def _run_sampled(circuit: Circuit, shots: int, seed: int, engine: _Engine) -> dict[str, int]:
    state = StateVector.zero(circuit.num_qubits)
    measures: list[Instruction] = []
    for instr in circuit.instructions:
        if instr.kind is GateKind.MEASURE:
            measures.append(instr)
        elif instr.kind is not GateKind.BARRIER:
            engine.apply(state.amplitudes, gate_matrix(instr.kind, instr.params), instr.qubits)

    counts: dict[str, int] = {}
    if not measures:
        counts[_bitstring([0] * circuit.num_clbits)] = shots
        return counts

    cdf = np.cumsum(state.probabilities())
    cdf[-1] = 1.0
    draws = np.array([_shot_rng(seed, s).random() for s in range(shots)])
    outcomes = np.minimum(np.searchsorted(cdf, draws, side="right"), cdf.size - 1)
    key_cache: dict[int, str] = {}
    for basis in outcomes:
        basis = int(basis)
        key = key_cache.get(basis)
        if key is None:
            clbits = [0] * circuit.num_clbits
            for instr in measures:
                clbits[instr.clbits[0]] = (basis >> instr.qubits[0]) & 1
            key = _bitstring(clbits)
            key_cache[basis] = key
        counts[key] = counts.get(key, 0) + 1
    return counts


def _run_trajectories(circuit: Circuit, shots: int, seed: int, engine: _Engine,
                      split: int) -> dict[str, int]:
    prefix = StateVector.zero(circuit.num_qubits)
    for instr in circuit.instructions[:split]:
        if instr.kind is not GateKind.BARRIER:
            engine.apply(prefix.amplitudes, gate_matrix(instr.kind, instr.params), instr.qubits)
    suffix = circuit.instructions[split:]

    counts: dict[str, int] = {}
    for shot in range(shots):
        rng = _shot_rng(seed, shot)
        amp = prefix.amplitudes.copy()
        clbits = [0] * circuit.num_clbits
        for instr in suffix:
            if instr.kind is GateKind.BARRIER:
                continue
            if instr.kind is GateKind.MEASURE:
                clbits[instr.clbits[0]] = _measure_qubit(amp, instr.qubits[0], rng)
            elif instr.kind is GateKind.RESET:
                _reset_qubit(amp, instr.qubits[0], rng)
            else:
                engine.apply(amp, gate_matrix(instr.kind, instr.params), instr.qubits)
        key = _bitstring(clbits)
        counts[key] = counts.get(key, 0) + 1
    return counts


def final_amplitudes(circuit: Circuit, config: SimConfig | None = None) -> StateVector:
    """Exact final state of a measurement-free circuit."""
    config = config or SimConfig()
    if circuit.num_qubits > config.max_qubits:
        raise ValueError(
            f"circuit needs {circuit.num_qubits} qubits, over the "
            f"{config.max_qubits}-qubit budget"
        )
    for instr in circuit.instructions:
        if instr.kind in (GateKind.MEASURE, GateKind.RESET):
            raise ValueError("circuit contains non-unitary instructions")
    problems = validate_circuit(circuit)
    if problems:
        raise ValueError(f"invalid circuit: {problems[0]}")

    state = StateVector.zero(circuit.num_qubits)
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        engine = _Engine(circuit.num_qubits, config.workers, pool)
        for instr in circuit.instructions:
            if instr.kind is not GateKind.BARRIER:
                engine.apply(state.amplitudes, gate_matrix(instr.kind, instr.params),
                             instr.qubits)
    finally:
        if pool is not None:
            pool.shutdown(wait=True)
    return state
