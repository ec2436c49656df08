"""Gate definitions and state-vector kernels for H, T, X, CNOT, G, C-G and U2.

Conventions:

* ``T = e^{-i pi/8} diag(e^{i pi/8}, e^{-i pi/8}) = diag(1, e^{-i pi/4})``,
  the global phase is kept as written so that ``T**8 == I``.
* ``G(g) = diag(g, 1/g)`` with ``g > 0`` and ``g != 1``.
* Two-qubit matrices are ordered ``control (x) target`` with the control as
  the high bit: rows ``|c t> = |00>, |01>, |10>, |11>``.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .state import ScaledState, StateError, maybe_rescale

G_MIN = 2.0**-32
G_MAX = 2.0**32


class GateError(ValueError):
    """A malformed gate instruction; the message names the offending field."""


class Kind(str, enum.Enum):
    H = "H"
    T = "T"
    X = "X"
    CNOT = "CNOT"
    G = "G"
    CG = "CG"
    U2 = "U2"


CONTROLLED = (Kind.CNOT, Kind.CG)

_SQRT1_2 = 1 / math.sqrt(2)
H_MATRIX = np.array([[_SQRT1_2, _SQRT1_2], [_SQRT1_2, -_SQRT1_2]], dtype=np.complex128)
T_MATRIX = cmath.exp(-1j * math.pi / 8) * np.array(
    [[cmath.exp(1j * math.pi / 8), 0], [0, cmath.exp(-1j * math.pi / 8)]],
    dtype=np.complex128,
)
X_MATRIX = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def check_g(g, field: str = "g") -> float:
    if isinstance(g, bool) or not isinstance(g, (int, float, np.floating, np.integer)):
        raise GateError(f"{field}: expected a real number, got {g!r}")
    g = float(g)
    if not math.isfinite(g) or g <= 0:
        raise GateError(f"{field}: must be a finite positive real, got {g!r}")
    if g == 1.0:
        raise GateError(f"{field}: g = 1 is excluded (G would be the identity)")
    if not G_MIN <= g <= G_MAX:
        raise GateError(f"{field}: {g!r} outside the supported range [2^-32, 2^32]")
    return g


@dataclass(frozen=True)
class GateOp:
    """One gate instruction.

    ``power`` is only meaningful for ``G`` and stands for ``G**power``.
    """

    kind: Kind
    target: int
    control: int | None = None
    g: float | None = None
    matrix: tuple[complex, complex, complex, complex] | None = None
    power: int = 1

    def __post_init__(self):
        try:
            kind = Kind(self.kind)
        except ValueError:
            raise GateError(f"kind: unknown gate kind {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not isinstance(self.target, (int, np.integer)) or self.target < 0:
            raise GateError(f"target: expected a nonnegative integer, got {self.target!r}")
        if kind in CONTROLLED:
            if self.control is None:
                raise GateError(f"control: {kind.value} requires a control qubit")
            if self.control < 0:
                raise GateError(f"control: expected a nonnegative integer, got {self.control!r}")
            if self.control == self.target:
                raise GateError(f"control: control and target are both qubit {self.target}")
        elif self.control is not None:
            raise GateError(f"control: {kind.value} takes no control qubit")
        if kind in (Kind.G, Kind.CG):
            object.__setattr__(self, "g", check_g(self.g))
        elif self.g is not None:
            raise GateError(f"g: {kind.value} takes no g parameter")
        if kind is Kind.U2:
            if self.matrix is None or len(self.matrix) != 4:
                raise GateError("matrix: U2 requires four complex entries")
            entries = tuple(complex(z) for z in self.matrix)
            if not all(cmath.isfinite(z) for z in entries):
                raise GateError("matrix: entries must be finite")
            object.__setattr__(self, "matrix", entries)
        elif self.matrix is not None:
            raise GateError(f"matrix: {kind.value} takes no matrix")
        if isinstance(self.power, bool) or not isinstance(self.power, (int, np.integer)):
            raise GateError(f"power: expected an integer, got {self.power!r}")
        if self.power != 1 and kind is not Kind.G:
            raise GateError(f"power: only G accepts a repeat count, not {kind.value}")
        if self.power < 0:
            raise GateError(f"power: repeat count must be nonnegative, got {self.power}")

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    @property
    def is_unitary(self) -> bool:
        return self.kind in (Kind.H, Kind.T, Kind.X, Kind.CNOT)


def H(q: int) -> GateOp:
    return GateOp(Kind.H, q)


def T(q: int) -> GateOp:
    return GateOp(Kind.T, q)


def X(q: int) -> GateOp:
    return GateOp(Kind.X, q)


def CNOT(control: int, target: int) -> GateOp:
    return GateOp(Kind.CNOT, target, control=control)


def G(q: int, g: float, power: int = 1) -> GateOp:
    return GateOp(Kind.G, q, g=g, power=power)


def CG(control: int, target: int, g: float) -> GateOp:
    return GateOp(Kind.CG, target, control=control, g=g)


def U2(q: int, matrix) -> GateOp:
    m = np.asarray(matrix, dtype=np.complex128).reshape(4)
    return GateOp(Kind.U2, q, matrix=tuple(complex(z) for z in m))


def g_matrix(g: float) -> np.ndarray:
    return np.array([[g, 0], [0, 1 / g]], dtype=np.complex128)


def controlled(m: np.ndarray) -> np.ndarray:
    out = np.eye(4, dtype=np.complex128)
    out[2:, 2:] = m
    return out


def single_qubit_matrix(op: GateOp) -> np.ndarray:
    """The 2x2 matrix acting on the target (the controlled block for CNOT/CG)."""
    if op.kind is Kind.H:
        return H_MATRIX.copy()
    if op.kind is Kind.T:
        return T_MATRIX.copy()
    if op.kind in (Kind.X, Kind.CNOT):
        return X_MATRIX.copy()
    if op.kind is Kind.G:
        return np.array([[op.g**op.power, 0], [0, op.g ** (-op.power)]], dtype=np.complex128)
    if op.kind is Kind.CG:
        return g_matrix(op.g)
    return np.array(op.matrix, dtype=np.complex128).reshape(2, 2)


def gate_matrix(op: GateOp) -> np.ndarray:
    """2x2 matrix for single-qubit kinds, 4x4 in (control, target) order otherwise."""
    m = single_qubit_matrix(op)
    if op.kind in CONTROLLED:
        return controlled(m)
    return m


# -- kernels on raw amplitude arrays -------------------------------------------


def apply_1q(amps: np.ndarray, m: np.ndarray, qubit: int) -> np.ndarray:
    view = amps.reshape(-1, 2, 1 << qubit)
    a, b = view[:, 0, :], view[:, 1, :]
    out = np.empty_like(view)
    out[:, 0, :] = m[0, 0] * a + m[0, 1] * b
    out[:, 1, :] = m[1, 0] * a + m[1, 1] * b
    return out.reshape(-1)


def apply_2q(amps: np.ndarray, m: np.ndarray, first: int, second: int) -> np.ndarray:
    """Apply a 4x4 matrix whose row order is ``first (x) second`` (first = high bit)."""
    if first == second:
        raise GateError("two-qubit kernel needs distinct qubits")
    hi, lo = max(first, second), min(first, second)
    if first == lo:
        perm = [0, 2, 1, 3]
        m = m[np.ix_(perm, perm)]
    n = amps.size.bit_length() - 1
    view = amps.reshape(1 << (n - hi - 1), 2, 1 << (hi - lo - 1), 2, 1 << lo)
    pairs = view.transpose(1, 3, 0, 2, 4).reshape(4, -1)
    out = (m @ pairs).reshape(2, 2, *view.shape[0:5:2])
    return out.transpose(2, 0, 3, 1, 4).reshape(-1)


def _check_indices(s: ScaledState, op: GateOp) -> None:
    for q in op.qubits:
        if q >= s.n_qubits:
            raise GateError(
                f"{'control' if q == op.control else 'target'}: qubit {q} out of range "
                f"for {s.n_qubits} qubits"
            )


def apply(s: ScaledState, op: GateOp) -> ScaledState:
    """Apply ``op`` and return a fresh state (rescaled when the ledger window is left)."""
    _check_indices(s, op)
    if op.kind is Kind.G:
        return apply_G_repeated(s, op.target, op.g, op.power)
    if op.kind in CONTROLLED:
        amps = apply_2q(s.amps, gate_matrix(op), op.control, op.target)
    else:
        amps = apply_1q(s.amps, single_qubit_matrix(op), op.target)
    if not np.any(amps):
        raise StateError(f"{op.kind.value} annihilated the state")
    return maybe_rescale(ScaledState(s.n_qubits, amps, s.log_scale))


def apply_G_repeated(s: ScaledState, qubit: int, g: float, r: int) -> ScaledState:
    """``G(g)**r`` on ``qubit`` with the growth ``g**r`` routed through the ledger.

    The two halves are multiplied by ``g**r`` and ``g**-r`` relative to a
    common exponent chosen so the larger half peaks at magnitude one; the
    smaller half underflows gracefully when the ratio exceeds double range.
    """
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 0:
        raise GateError(f"power: repeat count must be a nonnegative integer, got {r!r}")
    if not 0 <= qubit < s.n_qubits:
        raise GateError(f"target: qubit {qubit} out of range for {s.n_qubits} qubits")
    g = check_g(g)
    if r == 0:
        return s.copy()
    view = s.amps.reshape(-1, 2, 1 << qubit)
    step = r * math.log(g)
    peaks = np.max(np.abs(view), axis=(0, 2))
    logs = []
    for half, shift in ((0, step), (1, -step)):
        if peaks[half] > 0:
            logs.append(math.log(peaks[half]) + shift)
    ref = max(logs)
    out = np.empty_like(view)
    for half, shift in ((0, step), (1, -step)):
        factor = _safe_exp(shift - ref) if peaks[half] > 0 else 0.0
        out[:, half, :] = view[:, half, :] * factor
    return ScaledState(s.n_qubits, out.reshape(-1), s.log_scale + ref)


def _safe_exp(x: float) -> float:
    # factors below double range underflow to zero by design
    return math.exp(x) if x > -745.2 else 0.0

