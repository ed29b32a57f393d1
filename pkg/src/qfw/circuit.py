"""Gate-level intermediate representation shared by the whole framework.

A :class:`Circuit` is a flat, register-free program: all qubits live in one
contiguous index space (likewise clbits) and instructions appear in program
order.  Qubit 0 is the least-significant bit of a basis-state index; this
bit-ordering contract is fixed project-wide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class GateKind(str, Enum):
    """Supported instruction kinds (the qelib1-derived primitive set)."""

    H = "h"
    X = "x"
    Y = "y"
    Z = "z"
    S = "s"
    SDG = "sdg"
    T = "t"
    TDG = "tdg"
    RX = "rx"
    RY = "ry"
    RZ = "rz"
    U1 = "u1"
    U2 = "u2"
    U3 = "u3"
    CX = "cx"
    CZ = "cz"
    SWAP = "swap"
    CCX = "ccx"
    ID = "id"
    MEASURE = "measure"
    RESET = "reset"
    BARRIER = "barrier"

    @property
    def num_qubits(self) -> int | None:
        """Fixed qubit arity, or None for variable arity (barrier)."""
        return _QUBIT_ARITY[self]

    @property
    def num_params(self) -> int:
        return _PARAM_COUNT.get(self, 0)

    @property
    def is_unitary(self) -> bool:
        """True for kinds that transform the state by a unitary matrix."""
        return self not in (GateKind.MEASURE, GateKind.RESET, GateKind.BARRIER)


_QUBIT_ARITY: dict[GateKind, int | None] = {kind: 1 for kind in GateKind}
_QUBIT_ARITY.update(
    {
        GateKind.CX: 2,
        GateKind.CZ: 2,
        GateKind.SWAP: 2,
        GateKind.CCX: 3,
        GateKind.BARRIER: None,
    }
)

_PARAM_COUNT = {
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.U1: 1,
    GateKind.U2: 2,
    GateKind.U3: 3,
}


@dataclass(frozen=True)
class Instruction:
    """One program step: a gate, measurement, reset or barrier.

    ``clbits`` is nonempty only for measure, which pairs exactly one qubit
    with one clbit.  ``params`` holds real angles in radians.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    clbits: tuple[int, ...] = ()
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GateKind(self.kind))
        object.__setattr__(self, "qubits", tuple(self.qubits))
        object.__setattr__(self, "clbits", tuple(self.clbits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))


@dataclass
class Circuit:
    """Parsed gate-level program over flat qubit/clbit index spaces.

    The name is a label only and is excluded from structural equality.
    """

    num_qubits: int
    num_clbits: int = 0
    instructions: list[Instruction] = field(default_factory=list)
    name: str = field(default="circuit", compare=False)

    def _add(self, kind: GateKind, qubits: tuple[int, ...], clbits: tuple[int, ...] = (),
             params: tuple[float, ...] = ()) -> "Circuit":
        self.instructions.append(Instruction(kind, qubits, clbits, params))
        return self

    # Builder helpers; they append without validating, see validate().
    def h(self, q: int) -> "Circuit": return self._add(GateKind.H, (q,))
    def x(self, q: int) -> "Circuit": return self._add(GateKind.X, (q,))
    def y(self, q: int) -> "Circuit": return self._add(GateKind.Y, (q,))
    def z(self, q: int) -> "Circuit": return self._add(GateKind.Z, (q,))
    def s(self, q: int) -> "Circuit": return self._add(GateKind.S, (q,))
    def sdg(self, q: int) -> "Circuit": return self._add(GateKind.SDG, (q,))
    def t(self, q: int) -> "Circuit": return self._add(GateKind.T, (q,))
    def tdg(self, q: int) -> "Circuit": return self._add(GateKind.TDG, (q,))
    def id(self, q: int) -> "Circuit": return self._add(GateKind.ID, (q,))
    def rx(self, theta: float, q: int) -> "Circuit": return self._add(GateKind.RX, (q,), params=(theta,))
    def ry(self, theta: float, q: int) -> "Circuit": return self._add(GateKind.RY, (q,), params=(theta,))
    def rz(self, theta: float, q: int) -> "Circuit": return self._add(GateKind.RZ, (q,), params=(theta,))
    def u1(self, lam: float, q: int) -> "Circuit": return self._add(GateKind.U1, (q,), params=(lam,))

    def u2(self, phi: float, lam: float, q: int) -> "Circuit":
        return self._add(GateKind.U2, (q,), params=(phi, lam))

    def u3(self, theta: float, phi: float, lam: float, q: int) -> "Circuit":
        return self._add(GateKind.U3, (q,), params=(theta, phi, lam))

    def cx(self, control: int, target: int) -> "Circuit": return self._add(GateKind.CX, (control, target))
    def cz(self, a: int, b: int) -> "Circuit": return self._add(GateKind.CZ, (a, b))
    def swap(self, a: int, b: int) -> "Circuit": return self._add(GateKind.SWAP, (a, b))

    def ccx(self, c1: int, c2: int, target: int) -> "Circuit":
        return self._add(GateKind.CCX, (c1, c2, target))

    def measure(self, qubit: int, clbit: int) -> "Circuit":
        return self._add(GateKind.MEASURE, (qubit,), (clbit,))

    def reset(self, q: int) -> "Circuit": return self._add(GateKind.RESET, (q,))

    def barrier(self, *qubits: int) -> "Circuit":
        """Barrier over the given qubits, or over all qubits when none given."""
        qs = qubits if qubits else tuple(range(self.num_qubits))
        return self._add(GateKind.BARRIER, qs)

    def measure_all(self) -> "Circuit":
        """Measure qubit k to clbit k for every qubit."""
        for q in range(self.num_qubits):
            self.measure(q, q)
        return self


def validate(circuit: Circuit) -> list[str]:
    """Check every Circuit/Instruction invariant.

    Returns an empty list when the circuit is well formed, otherwise one
    human-readable description per violation.
    """
    problems: list[str] = []
    if circuit.num_qubits < 0:
        problems.append("num_qubits is negative")
    if circuit.num_clbits < 0:
        problems.append("num_clbits is negative")

    for i, instr in enumerate(circuit.instructions):
        kind = instr.kind
        arity = kind.num_qubits
        if arity is None:
            if len(instr.qubits) < 1:
                problems.append(f"instruction {i}: barrier needs at least one qubit")
        elif len(instr.qubits) != arity:
            problems.append(
                f"instruction {i}: {kind.value} expects {arity} qubit(s), got {len(instr.qubits)}"
            )
        if len(instr.params) != kind.num_params:
            problems.append(
                f"instruction {i}: {kind.value} expects {kind.num_params} parameter(s), "
                f"got {len(instr.params)}"
            )
        if len(set(instr.qubits)) != len(instr.qubits):
            problems.append(f"duplicate qubit operand in instruction {i}")
        for q in instr.qubits:
            if not 0 <= q < circuit.num_qubits:
                problems.append(
                    f"instruction {i}: qubit {q} out of range for {circuit.num_qubits}-qubit circuit"
                )
        if kind is GateKind.MEASURE:
            if len(instr.clbits) != 1:
                problems.append(f"instruction {i}: measure pairs one qubit with one clbit")
            for c in instr.clbits:
                if not 0 <= c < circuit.num_clbits:
                    problems.append(
                        f"instruction {i}: clbit {c} out of range for "
                        f"{circuit.num_clbits}-clbit circuit"
                    )
        elif instr.clbits:
            problems.append(f"instruction {i}: {kind.value} takes no clbits")
    return problems
