"""Unnormalized multi-qubit states with a logarithmic scale ledger.

Non-unitary gates change the length of a state vector, and repeated
application of ``G`` grows or shrinks amplitudes geometrically.  A
:class:`ScaledState` keeps working amplitudes near unit magnitude and
moves the overall magnitude into ``log_scale``::

    true amplitudes = exp(log_scale) * amps

Qubit ``k`` is bit ``k`` of the basis index (little-endian).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

PROB_TOL = 1e-12

# auto-rescale window for gate kernels
LEDGER_LOW = 2.0**-32
LEDGER_HIGH = 2.0**32


class StateError(ValueError):
    """Invalid state construction or impossible measurement request."""


@dataclass
class ScaledState:
    n_qubits: int
    amps: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 0:
            raise StateError(f"n_qubits must be nonnegative, got {self.n_qubits}")
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (1 << self.n_qubits,):
            raise StateError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {self.amps.shape}"
            )
        if not np.all(np.isfinite(self.amps)):
            raise StateError("amplitudes must be finite")
        if not np.any(self.amps):
            raise StateError("the all-zero vector is not a valid state")
        self.log_scale = float(self.log_scale)

    def copy(self) -> ScaledState:
        return ScaledState(self.n_qubits, self.amps.copy(), self.log_scale)

    def true_amplitudes(self) -> np.ndarray:
        """Amplitudes with the ledger multiplied back in (may overflow)."""
        return self.amps * math.exp(self.log_scale)

    def normalized(self) -> np.ndarray:
        """Unit-norm amplitude vector; global phase is kept."""
        return self.amps / np.linalg.norm(self.amps)


def from_amplitudes(amps, log_scale: float = 0.0) -> ScaledState:
    amps = np.asarray(amps, dtype=np.complex128)
    n = int(amps.size).bit_length() - 1
    if amps.ndim != 1 or amps.size != 1 << n:
        raise StateError(f"amplitude count {amps.size} is not a power of two")
    return ScaledState(n, amps, log_scale)


def init_basis(n_qubits: int, basis_index: int = 0) -> ScaledState:
    if n_qubits < 0:
        raise StateError(f"n_qubits must be nonnegative, got {n_qubits}")
    if not 0 <= basis_index < 1 << n_qubits:
        raise StateError(
            f"basis index {basis_index} out of range for {n_qubits} qubits"
        )
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[basis_index] = 1.0
    return ScaledState(n_qubits, amps, 0.0)


def norm_squared(s: ScaledState) -> tuple[float, float]:
    """Return ``(mantissa, log_part)`` with ``d^2 = mantissa * e**log_part``.

    The mantissa lies in ``[1, e)``; ``log_part`` is an integer-valued float.
    """
    peak = float(np.max(np.abs(s.amps)))
    inner = float(np.sum(np.abs(s.amps / peak) ** 2))
    total = 2.0 * (s.log_scale + math.log(peak)) + math.log(inner)
    nearest = round(total)
    if abs(total - nearest) <= 4 * np.finfo(float).eps * max(1.0, abs(total)):
        total = float(nearest)
    log_part = math.floor(total)
    mantissa = math.exp(total - log_part)
    if mantissa >= math.e:  # rounding at the upper edge
        mantissa /= math.e
        log_part += 1
    return mantissa, float(log_part)


def log_norm_squared(s: ScaledState) -> float:
    mantissa, log_part = norm_squared(s)
    return log_part + math.log(mantissa)


def _qubit_view(amps: np.ndarray, qubit: int) -> np.ndarray:
    # axis 1 of the view is the requested qubit
    return amps.reshape(-1, 2, 1 << qubit)


def _check_qubit(s: ScaledState, qubit: int) -> None:
    if not 0 <= qubit < s.n_qubits:
        raise StateError(f"qubit {qubit} out of range for {s.n_qubits} qubits")


def measure_probabilities(s: ScaledState, qubit: int) -> tuple[float, float]:
    """Marginal outcome probabilities of one qubit.

    Only the working amplitudes enter, so the result does not depend on
    ``log_scale``.  Both values are computed from their own branch weight,
    which keeps tiny probabilities accurate instead of forming ``1 - p``.
    """
    _check_qubit(s, qubit)
    weights = np.abs(_qubit_view(s.amps, qubit)) ** 2
    w0 = float(weights[:, 0, :].sum())
    w1 = float(weights[:, 1, :].sum())
    total = w0 + w1
    return w0 / total, w1 / total


def rescale(s: ScaledState) -> ScaledState:
    """Factor the largest magnitude into the ledger so that ``max|amp| == 1``."""
    peak = float(np.max(np.abs(s.amps)))
    # |a/|a|| can round to 1 - ulp; treat that as already rescaled
    if abs(peak - 1.0) <= 4 * np.finfo(float).eps:
        return s.copy()
    exponent = math.log(peak)
    return ScaledState(s.n_qubits, s.amps / peak, s.log_scale + exponent)


def maybe_rescale(s: ScaledState) -> ScaledState:
    """Rescale only when the peak magnitude has left the ledger window."""
    peak = float(np.max(np.abs(s.amps)))
    if LEDGER_LOW <= peak <= LEDGER_HIGH:
        return s
    return rescale(s)


def collapse(s: ScaledState, qubit: int, outcome: int) -> ScaledState:
    """Project ``qubit`` onto ``outcome`` and renormalize through the ledger."""
    _check_qubit(s, qubit)
    if outcome not in (0, 1):
        raise StateError(f"outcome must be 0 or 1, got {outcome}")
    amps = s.amps.copy()
    view = _qubit_view(amps, qubit)
    view[:, 1 - outcome, :] = 0.0
    if not np.any(amps):
        raise StateError(f"outcome {outcome} on qubit {qubit} has probability zero")
    return rescale(ScaledState(s.n_qubits, amps, s.log_scale))


def outcome_distribution(s: ScaledState, qubits: list[int]) -> np.ndarray:
    """Joint probabilities over ``qubits``; outcome index bit ``i`` is ``qubits[i]``."""
    for q in qubits:
        _check_qubit(s, q)
    probs = np.abs(s.amps) ** 2
    probs = probs / probs.sum()
    if not qubits:
        return np.ones(1)
    idx = np.arange(s.amps.size)
    outcome = np.zeros(s.amps.size, dtype=np.int64)
    for i, q in enumerate(qubits):
        outcome |= ((idx >> q) & 1) << i
    return np.bincount(outcome, weights=probs, minlength=1 << len(qubits))
