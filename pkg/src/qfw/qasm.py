"""OpenQASM 2.0 frontend: parse, emit and validate.

Parsing is hermetic: ``include "qelib1.inc"`` is recognized as a keyword and
satisfied from a built-in gate table, never from the filesystem.  All qreg
declarations are flattened into one contiguous qubit index space in
declaration order (likewise cregs), and user-defined gate bodies are
macro-expanded into the primitive set at the application site.

Angle expressions support integer, decimal and scientific literals, ``pi``,
parentheses, unary minus and the four arithmetic operators; they are
evaluated to a float at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .circuit import Circuit, GateKind, Instruction
from .circuit import validate as validate_circuit

__all__ = ["ParseError", "parse", "emit", "validate"]

validate = validate_circuit


class ParseError(Exception):
    """Parse failure with a source position and a category.

    category is one of "syntax", "unsupported" or "semantic".
    """

    def __init__(self, message: str, *, line: int, column: int, category: str = "syntax"):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.category = category


@dataclass(frozen=True)
class _Token:
    type: str
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
      (?P<comment>//[^\n]*)
    | (?P<number>(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?)
    | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<string>"[^"\n]*")
    | (?P<arrow>->)
    | (?P<eq>==)
    | (?P<sym>[{}()\[\];,+\-*/])
    | (?P<ws>[\ \t\r]+)
    | (?P<nl>\n)
    | (?P<bad>.)
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    for m in _TOKEN_RE.finditer(source):
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            line += 1
            col = 1
            continue
        if kind in ("ws", "comment"):
            col += len(text)
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {text!r}", line=line, column=col)
        tokens.append(_Token(kind, text, line, col))
        col += len(text)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# Primitive gates available after `include "qelib1.inc"`.  Keys are QASM
# names; values are IR kinds.  U and CX are language-level and always defined.
_QELIB1 = {kind.value: kind for kind in GateKind
           if kind not in (GateKind.MEASURE, GateKind.RESET, GateKind.BARRIER)}
_ALWAYS_DEFINED = {"U": GateKind.U3, "CX": GateKind.CX}


@dataclass(frozen=True)
class _UserGate:
    name: str
    params: tuple[str, ...]
    qargs: tuple[str, ...]
    # Body statements: ("apply", name, exprs, qarg_names, line, col)
    # or ("barrier", qarg_names).
    body: tuple[tuple, ...]


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.qregs: dict[str, tuple[int, int]] = {}  # name -> (offset, size)
        self.cregs: dict[str, tuple[int, int]] = {}
        self.gates: dict[str, GateKind | _UserGate] = dict(_ALWAYS_DEFINED)
        self.instructions: list[Instruction] = []
        self.num_qubits = 0
        self.num_clbits = 0

    # token plumbing

    def _peek(self) -> _Token:
        return self.tokens[self.pos]

    def _next(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.type != "eof":
            self.pos += 1
        return tok

    def _error(self, message: str, tok: _Token, category: str = "syntax"):
        raise ParseError(message, line=tok.line, column=tok.column, category=category)

    def _expect(self, type_: str, text: str | None = None, what: str | None = None) -> _Token:
        tok = self._next()
        if tok.type != type_ or (text is not None and tok.text != text):
            expected = what or (text if text is not None else type_)
            self._error(f"expected {expected}, found {tok.text!r}", tok)
        return tok

    def _expect_int(self, what: str) -> int:
        tok = self._expect("number", what=what)
        if not tok.text.isdigit():
            self._error(f"expected {what}, found {tok.text!r}", tok)
        return int(tok.text)

    # program structure

    def parse(self) -> Circuit:
        self._expect("ident", "OPENQASM", what='"OPENQASM 2.0" header')
        version = self._next()
        if version.type != "number":
            self._error("expected version number after OPENQASM", version)
        if version.text != "2.0":
            self._error(f"unsupported OPENQASM version {version.text}", version,
                        category="unsupported")
        self._expect("sym", ";")
        while self._peek().type != "eof":
            self._statement()
        return Circuit(self.num_qubits, self.num_clbits, self.instructions)

    def _statement(self) -> None:
        tok = self._peek()
        if tok.type != "ident":
            self._error(f"expected statement, found {tok.text!r}", tok)
        if tok.text == "include":
            self._include()
        elif tok.text in ("qreg", "creg"):
            self._reg_decl()
        elif tok.text == "gate":
            self._gate_def()
        elif tok.text == "opaque":
            self._opaque()
        elif tok.text == "if":
            self._if_statement()
        elif tok.text == "measure":
            self._measure()
        elif tok.text == "reset":
            self._reset()
        elif tok.text == "barrier":
            self._barrier()
        else:
            self._apply()

    def _include(self) -> None:
        kw = self._next()
        name = self._expect("string", what="a quoted include path")
        self._expect("sym", ";")
        if name.text != '"qelib1.inc"':
            self._error(f"only qelib1.inc can be included, not {name.text}", kw,
                        category="unsupported")
        self.gates.update(_QELIB1)

    def _reg_decl(self) -> None:
        kw = self._next()
        name = self._expect("ident", what="a register name")
        self._expect("sym", "[")
        size = self._expect_int("a register size")
        self._expect("sym", "]")
        self._expect("sym", ";")
        if size < 1:
            self._error(f"register {name.text!r} must have at least one element", name,
                        category="semantic")
        if name.text in self.qregs or name.text in self.cregs:
            self._error(f"register {name.text!r} already declared", name, category="semantic")
        if kw.text == "qreg":
            self.qregs[name.text] = (self.num_qubits, size)
            self.num_qubits += size
        else:
            self.cregs[name.text] = (self.num_clbits, size)
            self.num_clbits += size

    def _opaque(self) -> None:
        kw = self._next()
        self._error("opaque gates are not supported", kw, category="unsupported")

    def _if_statement(self) -> None:
        kw = self._next()
        self._expect("sym", "(")
        creg = self._expect("ident", what="a creg name")
        if creg.text not in self.cregs:
            self._error(f"undeclared creg {creg.text!r}", creg, category="semantic")
        self._expect("eq", "==")
        self._expect_int("an integer")
        self._expect("sym", ")")
        # The guarded operation is parsed for position accuracy, then the
        # whole conditional is rejected.
        self._error("if statements are not supported", kw, category="unsupported")

    # gate definitions and application

    def _gate_def(self) -> None:
        self._next()
        name = self._expect("ident", what="a gate name")
        if name.text in self.gates:
            self._error(f"gate {name.text!r} already defined", name, category="semantic")
        params: list[str] = []
        if self._peek().text == "(":
            self._next()
            if self._peek().text != ")":
                params = self._ident_list()
            self._expect("sym", ")")
        qargs = self._ident_list()
        if len(set(params)) != len(params) or len(set(qargs)) != len(qargs):
            self._error(f"duplicate formal argument in gate {name.text!r}", name,
                        category="semantic")
        self._expect("sym", "{")
        body: list[tuple] = []
        while self._peek().text != "}":
            tok = self._peek()
            if tok.type == "eof":
                self._error("unterminated gate body", tok)
            if tok.text == "barrier":
                self._next()
                args = self._ident_list()
                self._expect("sym", ";")
                self._check_body_qargs(args, qargs, tok)
                body.append(("barrier", tuple(args)))
                continue
            callee = self._expect("ident", what="a gate name")
            if callee.text == name.text:
                self._error(f"recursive gate definition {name.text!r}", callee,
                            category="semantic")
            if callee.text not in self.gates:
                self._error(f"gate {callee.text!r} is not defined", callee,
                            category="unsupported")
            exprs: list[tuple] = []
            if self._peek().text == "(":
                self._next()
                if self._peek().text != ")":
                    exprs = self._expr_list(set(params))
                self._expect("sym", ")")
            args = self._ident_list()
            self._expect("sym", ";")
            self._check_body_qargs(args, qargs, callee)
            self._check_arity(self.gates[callee.text], callee.text, len(exprs), len(args), callee)
            body.append(("apply", callee.text, tuple(exprs), tuple(args), callee.line, callee.column))
        self._expect("sym", "}")
        self.gates[name.text] = _UserGate(name.text, tuple(params), tuple(qargs), tuple(body))

    def _check_body_qargs(self, args: list[str], qargs: tuple[str, ...], tok: _Token) -> None:
        for a in args:
            if a not in qargs:
                self._error(f"unknown qubit argument {a!r} in gate body", tok,
                            category="semantic")

    def _check_arity(self, defn, name: str, n_params: int, n_qubits: int, tok: _Token) -> None:
        if isinstance(defn, GateKind):
            want_p, want_q = defn.num_params, defn.num_qubits
        else:
            want_p, want_q = len(defn.params), len(defn.qargs)
        if n_params != want_p:
            self._error(f"gate {name!r} expects {want_p} parameter(s), got {n_params}", tok,
                        category="semantic")
        if n_qubits != want_q:
            self._error(f"gate {name!r} expects {want_q} qubit argument(s), got {n_qubits}", tok,
                        category="semantic")

    def _ident_list(self) -> list[str]:
        names = [self._expect("ident", what="an identifier").text]
        while self._peek().text == ",":
            self._next()
            names.append(self._expect("ident", what="an identifier").text)
        return names

    def _apply(self) -> None:
        name = self._next()
        defn = self.gates.get(name.text)
        if defn is None:
            self._error(f"gate {name.text!r} is not defined", name, category="unsupported")
        exprs: list[tuple] = []
        if self._peek().text == "(":
            self._next()
            if self._peek().text != ")":
                exprs = self._expr_list(set())
            self._expect("sym", ")")
        args = self._argument_list()
        self._expect("sym", ";")
        self._check_arity(defn, name.text, len(exprs), len(args), name)
        params = tuple(_eval_expr(e, {}) for e in exprs)
        for qubits in self._broadcast(args, name):
            self._emit_gate(defn, params, qubits, name)

    def _emit_gate(self, defn, params: tuple[float, ...], qubits: tuple[int, ...],
                   site: _Token) -> None:
        if len(set(qubits)) != len(qubits):
            self._error("duplicate qubit operand", site, category="semantic")
        if isinstance(defn, GateKind):
            self.instructions.append(Instruction(defn, qubits, params=params))
            return
        env = dict(zip(defn.params, params))
        binding = dict(zip(defn.qargs, qubits))
        for stmt in defn.body:
            if stmt[0] == "barrier":
                self.instructions.append(
                    Instruction(GateKind.BARRIER, tuple(binding[a] for a in stmt[1]))
                )
                continue
            _, callee, exprs, argnames, line, col = stmt
            inner = self.gates[callee]
            inner_params = tuple(_eval_expr(e, env) for e in exprs)
            inner_qubits = tuple(binding[a] for a in argnames)
            self._emit_gate(inner, inner_params, inner_qubits, _Token("ident", callee, line, col))

    # arguments and broadcasting

    def _argument_list(self) -> list[tuple[str, int | None, _Token]]:
        args = [self._argument()]
        while self._peek().text == ",":
            self._next()
            args.append(self._argument())
        return args

    def _argument(self) -> tuple[str, int | None, _Token]:
        name = self._expect("ident", what="a register name")
        index: int | None = None
        if self._peek().text == "[":
            self._next()
            index = self._expect_int("an index")
            self._expect("sym", "]")
        return name.text, index, name

    def _resolve_qubit(self, arg: tuple[str, int | None, _Token]) -> tuple[int, int | None]:
        """Return (offset, size) with size None for an indexed single qubit."""
        name, index, tok = arg
        if name not in self.qregs:
            self._error(f"undeclared qreg {name!r}", tok, category="semantic")
        offset, size = self.qregs[name]
        if index is None:
            return offset, size
        if index >= size:
            self._error(f"index {index} out of range for qreg {name!r} of size {size}", tok,
                        category="semantic")
        return offset + index, None

    def _broadcast(self, args: list[tuple[str, int | None, _Token]],
                   site: _Token) -> list[tuple[int, ...]]:
        """Expand whole-register arguments into per-qubit applications."""
        resolved = [self._resolve_qubit(a) for a in args]
        widths = {size for _, size in resolved if size is not None}
        if not widths:
            return [tuple(offset for offset, _ in resolved)]
        if len(widths) > 1:
            self._error("register arguments must have equal sizes", site, category="semantic")
        width = widths.pop()
        out = []
        for j in range(width):
            out.append(tuple(offset + j if size is not None else offset
                             for offset, size in resolved))
        return out

    # measure / reset / barrier

    def _measure(self) -> None:
        kw = self._next()
        qarg = self._argument()
        self._expect("arrow", "->")
        carg = self._argument()
        self._expect("sym", ";")
        q_off, q_size = self._resolve_qubit(qarg)
        name, index, tok = carg
        if name not in self.cregs:
            self._error(f"undeclared creg {name!r}", tok, category="semantic")
        c_base, c_reg_size = self.cregs[name]
        if index is not None:
            if index >= c_reg_size:
                self._error(f"index {index} out of range for creg {name!r} of size {c_reg_size}",
                            tok, category="semantic")
            c_off, c_size = c_base + index, None
        else:
            c_off, c_size = c_base, c_reg_size
        if q_size != c_size:
            self._error("measure operands must have equal sizes", kw, category="semantic")
        if q_size is None:
            self.instructions.append(Instruction(GateKind.MEASURE, (q_off,), (c_off,)))
        else:
            for j in range(q_size):
                self.instructions.append(Instruction(GateKind.MEASURE, (q_off + j,), (c_off + j,)))

    def _reset(self) -> None:
        self._next()
        arg = self._argument()
        self._expect("sym", ";")
        offset, size = self._resolve_qubit(arg)
        for j in range(size or 1):
            self.instructions.append(Instruction(GateKind.RESET, (offset + j,)))

    def _barrier(self) -> None:
        self._next()
        args = self._argument_list()
        self._expect("sym", ";")
        qubits: list[int] = []
        for arg in args:
            offset, size = self._resolve_qubit(arg)
            qubits.extend(range(offset, offset + (size or 1)))
        self.instructions.append(Instruction(GateKind.BARRIER, tuple(qubits)))

    # angle expressions (evaluated at parse time; identifiers are only legal
    # inside gate bodies, where they refer to formal parameters)

    def _expr_list(self, param_names: set[str]) -> list[tuple]:
        exprs = [self._expr(param_names)]
        while self._peek().text == ",":
            self._next()
            exprs.append(self._expr(param_names))
        return exprs

    def _expr(self, params: set[str]) -> tuple:
        node = self._term(params)
        while self._peek().text in ("+", "-"):
            op = self._next().text
            node = ("bin", op, node, self._term(params))
        return node

    def _term(self, params: set[str]) -> tuple:
        node = self._factor(params)
        while self._peek().text in ("*", "/"):
            op = self._next().text
            node = ("bin", op, node, self._factor(params))
        return node

    def _factor(self, params: set[str]) -> tuple:
        tok = self._next()
        if tok.text == "-":
            return ("neg", self._factor(params))
        if tok.text == "+":
            return self._factor(params)
        if tok.text == "(":
            node = self._expr(params)
            self._expect("sym", ")")
            return node
        if tok.type == "number":
            return ("num", float(tok.text))
        if tok.type == "ident":
            if tok.text == "pi":
                return ("num", math.pi)
            if tok.text in params:
                return ("param", tok.text)
            self._error(f"unknown symbol {tok.text!r} in expression", tok, category="semantic")
        self._error(f"expected an expression, found {tok.text!r}", tok)


def _eval_expr(node: tuple, env: dict[str, float]) -> float:
    tag = node[0]
    if tag == "num":
        return node[1]
    if tag == "param":
        return env[node[1]]
    if tag == "neg":
        return -_eval_expr(node[1], env)
    op, lhs, rhs = node[1], _eval_expr(node[2], env), _eval_expr(node[3], env)
    if op == "+":
        return lhs + rhs
    if op == "-":
        return lhs - rhs
    if op == "*":
        return lhs * rhs
    return lhs / rhs


def parse(source: str) -> Circuit:
    """Parse an OpenQASM 2.0 program into a :class:`Circuit`.

    Raises :class:`ParseError` with a source position on malformed input
    (syntax), on constructs outside the supported subset (unsupported) and
    on out-of-range or redeclared references (semantic).
    """
    return _Parser(source).parse()


def _format_angle(value: float) -> str:
    # repr() is the shortest decimal form that reparses to the same float.
    return repr(float(value))


def emit(circuit: Circuit) -> str:
    """Serialize a valid circuit as an OpenQASM 2.0 program.

    The output uses a single qreg ``q`` and a single creg ``c``;
    ``parse(emit(c))`` is structurally equal to ``c``.
    """
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";']
    if circuit.num_qubits:
        lines.append(f"qreg q[{circuit.num_qubits}];")
    if circuit.num_clbits:
        lines.append(f"creg c[{circuit.num_clbits}];")
    for instr in circuit.instructions:
        if instr.kind is GateKind.MEASURE:
            lines.append(f"measure q[{instr.qubits[0]}] -> c[{instr.clbits[0]}];")
        elif instr.kind is GateKind.RESET:
            lines.append(f"reset q[{instr.qubits[0]}];")
        elif instr.kind is GateKind.BARRIER:
            operands = ",".join(f"q[{q}]" for q in instr.qubits)
            lines.append(f"barrier {operands};")
        else:
            name = instr.kind.value
            if instr.params:
                name += "(" + ",".join(_format_angle(p) for p in instr.params) + ")"
            operands = ",".join(f"q[{q}]" for q in instr.qubits)
            lines.append(f"{name} {operands};")
    return "\n".join(lines) + "\n"
