"""DIMACS CNF formulas and their classical evaluation.

Variable ``k`` (1-based) is bit ``k - 1`` of an assignment mask.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

BRUTE_FORCE_LIMIT = 24


class DimacsError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DimacsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CnfFormula:
    num_vars: int
    clauses: tuple[tuple[int, ...], ...]
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.num_vars < 0:
            raise DimacsError(f"negative variable count {self.num_vars}")
        clauses = tuple(tuple(int(lit) for lit in c) for c in self.clauses)
        for c in clauses:
            for lit in c:
                if lit == 0 or abs(lit) > self.num_vars:
                    raise DimacsError(f"literal {lit} out of range for {self.num_vars} variables")
        object.__setattr__(self, "clauses", clauses)

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @cached_property
    def _masks(self) -> list[tuple[int, int]]:
        out = []
        for c in self.clauses:
            pos = neg = 0
            for lit in c:
                if lit > 0:
                    pos |= 1 << (lit - 1)
                else:
                    neg |= 1 << (-lit - 1)
            out.append((pos, neg))
        return out


def parse_dimacs(text: str, strict: bool = True) -> CnfFormula:
    """Parse DIMACS CNF text.

    With ``strict=False`` a clause-count mismatch only emits a
    :class:`DimacsWarning`; every other problem raises :class:`DimacsError`.
    """
    header = None
    clauses: list[tuple[int, ...]] = []
    comments: list[str] = []
    current: list[int] = []
    current_line = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("c"):
            comments.append(line[1:].strip())
            continue
        if line.startswith("%"):
            break  # SATLIB trailer
        if line.startswith("p"):
            if header is not None:
                raise DimacsError("duplicate problem line", lineno)
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"malformed problem line {line!r}", lineno)
            try:
                n, m = int(parts[2]), int(parts[3])
            except ValueError:
                raise DimacsError(f"malformed problem line {line!r}", lineno) from None
            if n < 0 or m < 0:
                raise DimacsError("negative counts in problem line", lineno)
            header = (n, m)
            continue
        if header is None:
            raise DimacsError("clause data before the 'p cnf' header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad literal {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(tuple(current))
                current = []
                continue
            if abs(lit) > header[0]:
                raise DimacsError(f"literal {lit} exceeds variable count {header[0]}", lineno)
            if not current:
                current_line = lineno
            current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("clause not terminated by 0", current_line)
    n, m = header
    if len(clauses) != m:
        msg = f"header declares {m} clauses, found {len(clauses)}"
        if strict:
            raise DimacsError(msg)
        warnings.warn(msg, DimacsWarning, stacklevel=2)
    return CnfFormula(n, tuple(clauses), tuple(comments))


def serialize_dimacs(f: CnfFormula) -> str:
    lines = [f"c {c}" if c else "c" for c in f.comments]
    lines.append(f"p cnf {f.num_vars} {f.num_clauses}")
    lines.extend(" ".join([*map(str, c), "0"]) for c in f.clauses)
    return "\n".join(lines) + "\n"


def eval_formula(f: CnfFormula, assignment: int) -> int:
    if not 0 <= assignment < 1 << f.num_vars:
        raise ValueError(f"assignment {assignment} out of range for {f.num_vars} variables")
    inverted = ~assignment
    for pos, neg in f._masks:
        if not (assignment & pos or inverted & neg):
            return 0
    return 1


def truth_table(f: CnfFormula) -> np.ndarray:
    """Boolean array ``t`` with ``t[j] == f(j)`` for every assignment ``j``."""
    idx = np.arange(1 << f.num_vars, dtype=np.int64)
    table = np.ones(idx.size, dtype=bool)
    for clause in f.clauses:
        sat = np.zeros(idx.size, dtype=bool)
        for lit in clause:
            bit = ((idx >> (abs(lit) - 1)) & 1).astype(bool)
            sat |= bit if lit > 0 else ~bit
        table &= sat
    return table


def brute_force_count(f: CnfFormula, limit: int = BRUTE_FORCE_LIMIT) -> int:
    """Number of satisfying assignments, by plain enumeration."""
    if f.num_vars > limit:
        raise ValueError(f"brute force refused: {f.num_vars} variables exceeds limit {limit}")
    return sum(eval_formula(f, j) for j in range(1 << f.num_vars))
