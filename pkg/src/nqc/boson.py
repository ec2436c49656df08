"""Two-mode many-boson qubit and the boson-number cost of G.

The logical state is ``c0 |N bosons in mode 0> + c1 |M bosons in mode 1>``.
A single-boson measurement sees the one-particle density matrix
``diag(N |c0|^2, M |c1|^2)``, so it reports mode 0 with odds
``N |c0|^2 : M |c1|^2``.  ``G`` with integer ``g`` maps ``N -> g N`` and
``M -> M / g``: the amplitudes stay put and the odds grow by ``g^2``.

Boson counts are Python integers, so they never overflow; probabilities
are formed from logarithms of the counts.

For ``N = M = 1`` the one-particle matrix of the bare qubit also has the
coherence ``c0 conj(c1)`` off the diagonal (one boson in a superposition of
modes).  The diagonal form returned here holds for every other ``(N, M)``
and, for an entangled register with orthogonal branches, always.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import expit

NORM_TOL = 1e-12
ORTHO_TOL = 1e-12


class BosonError(ValueError):
    pass


def _count(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise BosonError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < 0:
        raise BosonError(f"{name} must be nonnegative, got {value}")
    return value


def _gain(g) -> int:
    if isinstance(g, bool) or not isinstance(g, (int, np.integer)) or g < 2:
        raise BosonError(f"g must be an integer >= 2, got {g!r}")
    return int(g)


@dataclass(frozen=True)
class BosonQubit:
    N: int
    M: int
    c0: complex
    c1: complex

    def __post_init__(self):
        object.__setattr__(self, "N", _count(self.N, "N"))
        object.__setattr__(self, "M", _count(self.M, "M"))
        c0, c1 = complex(self.c0), complex(self.c1)
        if abs(abs(c0) ** 2 + abs(c1) ** 2 - 1) > NORM_TOL:
            raise BosonError(f"|c0|^2 + |c1|^2 = {abs(c0) ** 2 + abs(c1) ** 2}, expected 1")
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "c1", c1)

    @property
    def weights(self) -> tuple[float, float]:
        return abs(self.c0) ** 2, abs(self.c1) ** 2


@dataclass(frozen=True)
class OneBodyDensity:
    """``diag(N w0, M w1)`` with the integer factors kept alongside the floats."""

    N: int
    M: int
    w0: float
    w1: float

    @property
    def log_diagonal(self) -> tuple[float, float]:
        return _log_product(self.N, self.w0), _log_product(self.M, self.w1)

    @property
    def matrix(self) -> np.ndarray:
        """Float matrix; an entry beyond the double range reads ``inf``."""
        return np.diag([_exp(v) for v in self.log_diagonal])

    def exact(self) -> tuple[Fraction, Fraction]:
        """Diagonal in rational arithmetic, exact in the float weights."""
        return self.N * Fraction(self.w0), self.M * Fraction(self.w1)

    @property
    def trace_positive(self) -> bool:
        return (self.N > 0 and self.w0 > 0) or (self.M > 0 and self.w1 > 0)


def _log_product(count: int, weight: float) -> float:
    if count == 0 or weight == 0:
        return -math.inf
    return math.log(count) + math.log(weight)


def _exp(x: float) -> float:
    if x == -math.inf:
        return 0.0
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def reduced_density(b: BosonQubit) -> OneBodyDensity:
    w0, w1 = b.weights
    return OneBodyDensity(b.N, b.M, w0, w1)


def measure_probs_from_density(rho: OneBodyDensity) -> tuple[float, float]:
    if not rho.trace_positive:
        raise BosonError("one-particle density has zero trace; no boson to detect")
    l0, l1 = rho.log_diagonal
    if l1 == -math.inf:
        return 1.0, 0.0
    if l0 == -math.inf:
        return 0.0, 1.0
    log_odds = l0 - l1
    return float(expit(log_odds)), float(expit(-log_odds))


def single_particle_measure_prob(b: BosonQubit) -> tuple[float, float]:
    """Chance that one detected boson is in mode 0 or mode 1."""
    return measure_probs_from_density(reduced_density(b))


def single_particle_odds(b: BosonQubit) -> Fraction:
    """``N |c0|^2 / (M |c1|^2)`` as an exact rational."""
    d0, d1 = reduced_density(b).exact()
    if d1 == 0:
        raise BosonError("mode-1 weight is zero; the odds are infinite")
    return d0 / d1


def apply_boson_G(b: BosonQubit, g: int = 2) -> BosonQubit:
    g = _gain(g)
    if b.M % g:
        raise BosonError(f"g = {g} does not divide M = {b.M}")
    return BosonQubit(g * b.N, b.M // g, b.c0, b.c1)


@dataclass(frozen=True)
class ResourceReport:
    g: int
    r: int
    N_initial: int
    M_initial: int
    N_final: int
    M_final: int
    pumped: int
    removed: int

    @property
    def growth_factor(self) -> int:
        return self.g**self.r

    def to_dict(self, b: BosonQubit | None = None) -> dict:
        out = {
            "g": self.g,
            "r": self.r,
            "N_initial": str(self.N_initial),
            "M_initial": str(self.M_initial),
            "N": str(self.N_final),
            "M": str(self.M_final),
            "pumped": str(self.pumped),
            "removed": str(self.removed),
            "growth_factor": str(self.growth_factor),
            "log2_growth": self.r * math.log2(self.g),
        }
        if b is not None:
            final = BosonQubit(self.N_final, self.M_final, b.c0, b.c1)
            rho = reduced_density(final)
            l0, l1 = rho.log_diagonal
            out["rho_diagonal"] = [float(v) for v in np.diag(rho.matrix)]
            out["rho_log10_diagonal"] = [v / math.log(10) for v in (l0, l1)]
            if rho.trace_positive:
                out["probabilities"] = list(measure_probs_from_density(rho))
        return out


def resource_report(b0: BosonQubit, g: int = 2, r: int = 1) -> ResourceReport:
    """Bosons pumped into mode 0 and removed from mode 1 by ``r`` applications of G."""
    g = _gain(g)
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 0:
        raise BosonError(f"r must be a nonnegative integer, got {r!r}")
    factor = g ** int(r)
    if b0.M % factor:
        raise BosonError(f"g^r = {g}^{r} does not divide M = {b0.M}")
    n_final, m_final = b0.N * factor, b0.M // factor
    return ResourceReport(g, int(r), b0.N, b0.M, n_final, m_final, n_final - b0.N, b0.M - m_final)


# -- entangled register ---------------------------------------------------------------


@dataclass(frozen=True)
class EntangledBosonState:
    """``|x_branch> (x) |N in mode 0> + |y_branch> (x) |M in mode 1>``.

    The branch vectors carry the amplitudes: ``c0 |x>`` and ``c1 |y>`` on
    the ``k`` conventional qubits.  The two register states must be
    orthogonal.
    """

    x_branch: np.ndarray
    y_branch: np.ndarray
    N: int
    M: int

    def __post_init__(self):
        x = np.asarray(self.x_branch, dtype=np.complex128).reshape(-1)
        y = np.asarray(self.y_branch, dtype=np.complex128).reshape(-1)
        if x.shape != y.shape or x.size & (x.size - 1) or x.size == 0:
            raise BosonError(f"branches need equal power-of-two lengths, got {x.size} and {y.size}")
        object.__setattr__(self, "x_branch", x)
        object.__setattr__(self, "y_branch", y)
        object.__setattr__(self, "N", _count(self.N, "N"))
        object.__setattr__(self, "M", _count(self.M, "M"))
        w0, w1 = self.weights
        if abs(w0 + w1 - 1) > NORM_TOL:
            raise BosonError(f"branch weights sum to {w0 + w1}, expected 1")
        if w0 > 0 and w1 > 0:
            overlap = abs(np.vdot(x, y)) / math.sqrt(w0 * w1)
            if overlap > ORTHO_TOL:
                raise BosonError(f"register branches are not orthogonal: |<x|y>| = {overlap:.3e}")

    @classmethod
    def from_components(cls, c0, x, c1, y, N: int, M: int) -> EntangledBosonState:
        x = np.asarray(x, dtype=np.complex128)
        y = np.asarray(y, dtype=np.complex128)
        return cls(c0 * x / np.linalg.norm(x), c1 * y / np.linalg.norm(y), N, M)

    @property
    def n_register_qubits(self) -> int:
        return self.x_branch.size.bit_length() - 1

    @property
    def weights(self) -> tuple[float, float]:
        return float(np.vdot(self.x_branch, self.x_branch).real), float(np.vdot(self.y_branch, self.y_branch).real)

    def as_qubit(self) -> BosonQubit:
        """The unentangled qubit with the same branch weights."""
        w0, w1 = self.weights
        return BosonQubit(self.N, self.M, math.sqrt(w0), math.sqrt(w1))


def entangled_reduced_density(e: EntangledBosonState) -> OneBodyDensity:
    w0, w1 = e.weights
    return OneBodyDensity(e.N, e.M, w0, w1)


def apply_entangled_G(e: EntangledBosonState, g: int = 2) -> EntangledBosonState:
    g = _gain(g)
    if e.M % g:
        raise BosonError(f"g = {g} does not divide M = {e.M}")
    return EntangledBosonState(e.x_branch, e.y_branch, g * e.N, e.M // g)


@dataclass(frozen=True)
class Collapse:
    mode: int
    register: np.ndarray
    bosons: tuple[int, int]


def collapse(e: EntangledBosonState, mode: int) -> Collapse:
    """State after one boson is detected in ``mode``: only that branch survives."""
    if mode not in (0, 1):
        raise BosonError(f"mode must be 0 or 1, got {mode}")
    branch, count = (e.x_branch, e.N) if mode == 0 else (e.y_branch, e.M)
    weight = float(np.vdot(branch, branch).real)
    if weight == 0 or count == 0:
        raise BosonError(f"mode {mode} cannot be detected: the branch holds no bosons")
    register = branch / math.sqrt(weight)
    bosons = (e.N, 0) if mode == 0 else (0, e.M)
    return Collapse(mode, register, bosons)


def measure_single_boson(e: EntangledBosonState, u: float) -> Collapse:
    """Detect one boson using the uniform draw ``u`` in ``[0, 1)``."""
    p0, _ = measure_probs_from_density(entangled_reduced_density(e))
    return collapse(e, 0 if u < p0 else 1)
