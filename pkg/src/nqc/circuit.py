"""Circuits: text format, validation and execution.

Text format, one instruction per line, ``#`` starts a comment::

    qubits N
    h Q | t Q | x Q | cnot C T | g Q GVAL [REPEAT] | cg C T GVAL
    u Q a_re a_im b_re b_im c_re c_im d_re d_im
    oracle cnf PATH anc Q
    measure Q

``u`` lists the 2x2 matrix row-major.  The optional ``REPEAT`` on ``g``
stands for that many consecutive applications.  Measurements are terminal:
a measured qubit receives no further gates.
"""

from __future__ import annotations

import math
import os
import re
import time
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .cnf import CnfFormula, DimacsError, parse_dimacs, truth_table
from .gates import GateError, GateOp, Kind, apply, apply_G_repeated
from .oracle import apply_oracle
from .state import ScaledState, init_basis, measure_probabilities, norm_squared, outcome_distribution

DEFAULT_CAPACITY = 24
JOINT_LIMIT = 20


class CircuitError(ValueError):
    """Structural problem with a circuit (bad index, gate after measurement, ...)."""


class CircuitParseError(CircuitError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class CapacityError(ValueError):
    pass


def capacity_from_env(default: int = DEFAULT_CAPACITY) -> int:
    raw = os.environ.get("NQC_CAPACITY")
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError:
        raise CapacityError(f"NQC_CAPACITY must be an integer, got {raw!r}") from None
    if value < 0:
        raise CapacityError("NQC_CAPACITY must be nonnegative")
    return value


@dataclass(frozen=True)
class OracleRef:
    """SAT oracle on work qubits ``0 .. num_vars-1`` flipping ``ancilla``."""

    path: str
    ancilla: int
    formula: CnfFormula = field(compare=True)

    @property
    def work_qubits(self) -> range:
        return range(self.formula.num_vars)

    @property
    def qubits(self) -> tuple[int, ...]:
        return (*self.work_qubits, self.ancilla)


@dataclass(frozen=True)
class Measure:
    qubit: int

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qubit,)


Instruction = GateOp | OracleRef | Measure


@dataclass
class Circuit:
    n_qubits: int
    ops: list = field(default_factory=list)
    name: str = field(default="", compare=False)
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        self.ops = list(self.ops)
        self.validate()

    def validate(self) -> None:
        if self.n_qubits < 0:
            raise CircuitError(f"negative qubit count {self.n_qubits}")
        measured: set[int] = set()
        for pos, op in enumerate(self.ops):
            _check_instruction(op, self.n_qubits, measured, pos)

    @property
    def measured_qubits(self) -> list[int]:
        return [op.qubit for op in self.ops if isinstance(op, Measure)]


def _check_instruction(op, n_qubits: int, measured: set[int], pos: int) -> None:
    qubits = getattr(op, "qubits", None)
    if qubits is None:
        raise CircuitError(f"op {pos}: unsupported instruction {op!r}")
    for q in qubits:
        if not 0 <= q < n_qubits:
            raise CircuitError(f"op {pos}: qubit {q} out of range for {n_qubits} qubits")
    if isinstance(op, OracleRef) and op.ancilla in op.work_qubits:
        raise CircuitError(f"op {pos}: oracle ancilla {op.ancilla} overlaps the work register")
    if isinstance(op, Measure):
        if op.qubit in measured:
            raise CircuitError(f"op {pos}: qubit {op.qubit} measured twice")
        measured.add(op.qubit)
        return
    hit = measured.intersection(qubits)
    if hit:
        raise CircuitError(f"op {pos}: gate on already measured qubit {min(hit)}")


# -- parsing --------------------------------------------------------------------

_TOKEN = re.compile(r"\S+")

ARITY = {"h": 1, "t": 1, "x": 1, "cnot": 2, "g": (2, 3), "cg": 3, "u": 9, "measure": 1}
SIMPLE = {"h": Kind.H, "t": Kind.T, "x": Kind.X}


def _tokens(line: str) -> list[tuple[str, int]]:
    body = line.split("#", 1)[0]
    return [(m.group(), m.start() + 1) for m in _TOKEN.finditer(body)]


def _int(tok: tuple[str, int], lineno: int, what: str) -> int:
    text, col = tok
    try:
        value = int(text)
    except ValueError:
        raise CircuitParseError(f"expected integer {what}, got {text!r}", lineno, col) from None
    if value < 0:
        raise CircuitParseError(f"{what} must be nonnegative, got {value}", lineno, col)
    return value


def _float(tok: tuple[str, int], lineno: int, what: str) -> float:
    text, col = tok
    try:
        value = float(text)
    except ValueError:
        raise CircuitParseError(f"expected number for {what}, got {text!r}", lineno, col) from None
    if not math.isfinite(value):
        raise CircuitParseError(f"{what} must be finite, got {text!r}", lineno, col)
    return value


def default_loader(path: str, base: Path | None) -> CnfFormula:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return parse_dimacs(p.read_text(encoding="utf-8"))


def parse_instruction(
    toks: list[tuple[str, int]],
    lineno: int,
    loader: Callable[[str], CnfFormula],
):
    """Turn one tokenized line (mnemonic first) into an instruction."""
    mnemonic, col = toks[0]
    args = toks[1:]
    if mnemonic == "oracle":
        if len(args) != 4 or args[0][0] != "cnf" or args[2][0] != "anc":
            raise CircuitParseError("expected 'oracle cnf PATH anc Q'", lineno, col)
        path = args[1][0]
        ancilla = _int(args[3], lineno, "ancilla")
        try:
            formula = loader(path)
        except (OSError, DimacsError) as exc:
            raise CircuitParseError(f"cannot load oracle formula {path!r}: {exc}", lineno, args[1][1]) from None
        return OracleRef(path, ancilla, formula)
    if mnemonic not in ARITY:
        raise CircuitParseError(f"unknown mnemonic {mnemonic!r}", lineno, col)
    arity = ARITY[mnemonic]
    allowed = arity if isinstance(arity, tuple) else (arity,)
    if len(args) not in allowed:
        want = " or ".join(map(str, allowed))
        raise CircuitParseError(f"'{mnemonic}' takes {want} arguments, got {len(args)}", lineno, col)
    try:
        if mnemonic in SIMPLE:
            return GateOp(SIMPLE[mnemonic], _int(args[0], lineno, "qubit"))
        if mnemonic == "measure":
            return Measure(_int(args[0], lineno, "qubit"))
        if mnemonic == "cnot":
            return GateOp(Kind.CNOT, _int(args[1], lineno, "target"), control=_int(args[0], lineno, "control"))
        if mnemonic == "g":
            power = _int(args[2], lineno, "repeat count") if len(args) == 3 else 1
            return GateOp(Kind.G, _int(args[0], lineno, "qubit"), g=_float(args[1], lineno, "g"), power=power)
        if mnemonic == "cg":
            return GateOp(
                Kind.CG,
                _int(args[1], lineno, "target"),
                control=_int(args[0], lineno, "control"),
                g=_float(args[2], lineno, "g"),
            )
        # u
        parts = [_float(t, lineno, "matrix entry") for t in args[1:]]
        entries = tuple(complex(parts[2 * i], parts[2 * i + 1]) for i in range(4))
        return GateOp(Kind.U2, _int(args[0], lineno, "qubit"), matrix=entries)
    except GateError as exc:
        raise CircuitParseError(str(exc), lineno, col) from None


def parse_circuit(
    text: str,
    source: str | os.PathLike | None = None,
    loader: Callable[[str], CnfFormula] | None = None,
    extra: dict[str, Callable] | None = None,
) -> Circuit:
    """Parse circuit text.

    Oracle paths resolve relative to ``source``'s directory unless a
    ``loader`` is supplied.  ``extra`` maps additional mnemonics to handlers
    ``(tokens, lineno) -> instruction`` for extended formats.
    """
    base = Path(source).parent if source is not None else None
    load = loader or (lambda p: default_loader(p, base))
    n_qubits = None
    ops = []
    measured: set[int] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = _tokens(raw)
        if not toks:
            continue
        if n_qubits is None:
            if toks[0][0] != "qubits" or len(toks) != 2:
                raise CircuitParseError("first instruction must be 'qubits N'", lineno, toks[0][1])
            n_qubits = _int(toks[1], lineno, "qubit count")
            continue
        if toks[0][0] == "qubits":
            raise CircuitParseError("duplicate 'qubits' line", lineno, toks[0][1])
        if extra and toks[0][0] in extra:
            op = extra[toks[0][0]](toks, lineno)
        else:
            op = parse_instruction(toks, lineno, load)
        try:
            _check_instruction(op, n_qubits, measured, len(ops))
        except CircuitError as exc:
            msg = str(exc).split(": ", 1)[-1]
            raise CircuitParseError(msg, lineno, toks[0][1]) from None
        ops.append(op)
    if n_qubits is None:
        raise CircuitParseError("missing 'qubits N' line", 1)
    name = Path(source).stem if source is not None else ""
    return Circuit(n_qubits, ops, name=name, source=str(source) if source is not None else None)


def load_circuit(path: str | os.PathLike) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"), source=path)


def _num(x: float) -> str:
    return repr(float(x))


def format_instruction(op) -> str:
    if isinstance(op, Measure):
        return f"measure {op.qubit}"
    if isinstance(op, OracleRef):
        return f"oracle cnf {op.path} anc {op.ancilla}"
    k = op.kind
    if k in SIMPLE.values():
        return f"{k.value.lower()} {op.target}"
    if k is Kind.CNOT:
        return f"cnot {op.control} {op.target}"
    if k is Kind.G:
        base = f"g {op.target} {_num(op.g)}"
        return base if op.power == 1 else f"{base} {op.power}"
    if k is Kind.CG:
        return f"cg {op.control} {op.target} {_num(op.g)}"
    parts = " ".join(f"{_num(z.real)} {_num(z.imag)}" for z in op.matrix)
    return f"u {op.target} {parts}"


def serialize_circuit(c: Circuit, formatter: Callable | None = None) -> str:
    fmt = formatter or format_instruction
    lines = [f"qubits {c.n_qubits}"] + [fmt(op) for op in c.ops]
    return "\n".join(lines) + "\n"


# -- execution ------------------------------------------------------------------


def _fused(ops):
    """Merge runs of identical G gates into one repeated application."""
    pending = None
    for op in ops:
        if isinstance(op, GateOp) and op.kind is Kind.G:
            if pending is not None and (pending.target, pending.g) == (op.target, op.g):
                pending = GateOp(Kind.G, op.target, g=op.g, power=pending.power + op.power)
                continue
            if pending is not None:
                yield pending
            pending = op
            continue
        if pending is not None:
            yield pending
            pending = None
        yield op
    if pending is not None:
        yield pending


def simulate(
    c: Circuit,
    initial: ScaledState | None = None,
    capacity: int | None = None,
) -> ScaledState:
    """Final (unnormalized) state; measurements are terminal and skipped here."""
    limit = capacity_from_env() if capacity is None else capacity
    if c.n_qubits > limit:
        raise CapacityError(f"circuit needs {c.n_qubits} qubits, capacity is {limit}")
    s = init_basis(c.n_qubits, 0) if initial is None else initial
    if s.n_qubits != c.n_qubits:
        raise CircuitError(f"initial state has {s.n_qubits} qubits, circuit has {c.n_qubits}")
    tables: dict[int, np.ndarray] = {}
    for op in _fused(c.ops):
        if isinstance(op, Measure):
            continue
        if isinstance(op, OracleRef):
            key = id(op.formula)
            if key not in tables:
                tables[key] = truth_table(op.formula)
            s = apply_oracle(s, op.formula, op.work_qubits, op.ancilla, table=tables[key])
        elif op.kind is Kind.G:
            s = apply_G_repeated(s, op.target, op.g, op.power)
        else:
            s = apply(s, op)
    return s


@dataclass
class RunReport:
    n_qubits: int
    measured: list[int]
    probabilities: dict[int, tuple[float, float]]
    joint: np.ndarray | None
    norm_squared: tuple[float, float]
    shots: int = 0
    seed: int | None = None
    counts: dict[str, int] | None = None
    outcomes: np.ndarray | None = None
    wall_time: float = 0.0

    def outcome_label(self, index: int) -> str:
        """Bitstring of an outcome index; the rightmost character is ``measured[0]``."""
        return format(index, f"0{len(self.measured)}b") if self.measured else ""

    def to_dict(self, timing: bool = False) -> dict:
        mantissa, log_part = self.norm_squared
        out = {
            "n_qubits": self.n_qubits,
            "measured": list(self.measured),
            "probabilities": {str(q): list(p) for q, p in self.probabilities.items()},
            "norm_squared": {
                "mantissa": mantissa,
                "exponent": log_part,
                "log": log_part + math.log(mantissa),
                "log10": (log_part + math.log(mantissa)) / math.log(10),
            },
        }
        if self.joint is not None and len(self.measured) <= 10:
            out["joint"] = {self.outcome_label(i): float(p) for i, p in enumerate(self.joint) if p > 0}
        if self.shots:
            out["shots"] = self.shots
            out["seed"] = self.seed
            out["counts"] = dict(self.counts)
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _report(c: Circuit, s: ScaledState) -> RunReport:
    measured = c.measured_qubits or list(range(c.n_qubits))
    probs = {q: measure_probabilities(s, q) for q in measured}
    joint = outcome_distribution(s, measured) if len(measured) <= JOINT_LIMIT else None
    return RunReport(c.n_qubits, measured, probs, joint, norm_squared(s))


def run_exact(c: Circuit, initial: ScaledState | None = None, capacity: int | None = None) -> RunReport:
    """Exact outcome probabilities; with no ``measure`` lines every qubit counts as measured."""
    start = time.perf_counter()
    report = _report(c, simulate(c, initial, capacity))
    report.wall_time = time.perf_counter() - start
    return report


def sample_outcomes(dist: np.ndarray, seed: int, shots: int, first_shot: int = 0) -> np.ndarray:
    """Inverse-CDF sampling; shot ``k`` uses counter position ``k`` of the seed's stream."""
    cdf = np.cumsum(dist)
    cdf /= cdf[-1]
    u = rng.uniforms(seed, first_shot, shots)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(dist) - 1)


def run_shots(
    c: Circuit,
    shots: int,
    seed: int = 0,
    initial: ScaledState | None = None,
    capacity: int | None = None,
) -> RunReport:
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    start = time.perf_counter()
    s = simulate(c, initial, capacity)
    report = _report(c, s)
    if report.joint is None:
        raise CapacityError(f"sampling supports at most {JOINT_LIMIT} measured qubits")
    outcomes = sample_outcomes(report.joint, seed, shots)
    tally = np.bincount(outcomes, minlength=report.joint.size)
    report.shots = shots
    report.seed = seed
    report.outcomes = outcomes
    report.counts = {report.outcome_label(i): int(k) for i, k in enumerate(tally) if k}
    report.wall_time = time.perf_counter() - start
    return report


def operator(c: Circuit) -> np.ndarray:
    """Dense matrix of a gate-only circuit, column by column (small n only)."""
    dim = 1 << c.n_qubits
    out = np.empty((dim, dim), dtype=np.complex128)
    for col in range(dim):
        s = simulate(c, init_basis(c.n_qubits, col), capacity=max(c.n_qubits, 0))
        out[:, col] = s.true_amplitudes()
    return out
