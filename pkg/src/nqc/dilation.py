"""Postselected unitary dilation of G gates.

``G(g)`` with ``g > 1`` acts on a target qubit like the unitary::

    U(eta) = [[1, 0,              0,             0],
              [0, eta,            sqrt(1-eta^2), 0],
              [0, -sqrt(1-eta^2), eta,           0],
              [0, 0,              0,             1]]     eta = g^-2

on ``(target, ancilla)`` (target = high bit, ancilla starting in ``|0>``)
followed by keeping only runs where the ancilla reads ``0``.  The kept
target state is ``(alpha, eta beta)``, which is ``G(g)(alpha, beta) / g``.

A program reuses one ancilla qubit, placed above the base register; it is
back in ``|0>`` after every successful postselection.  ``G(g)`` with
``g < 1`` is compiled as ``X G(1/g) X``, C-G as its CNOT/G expansion, and a
non-unitary ``U2`` through its singular value decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .circuit import (
    CapacityError,
    Circuit,
    CircuitParseError,
    Measure,
    OracleRef,
    _float,
    _int,
    capacity_from_env,
    format_instruction,
    parse_circuit,
    serialize_circuit,
    simulate,
)
from .gates import CNOT, G, U2, X, GateOp, Kind, apply, apply_2q, check_g
from .state import ScaledState, from_amplitudes, log_norm_squared, maybe_rescale, outcome_distribution

UNITARY_TOL = 1e-12
# uniforms drawn per chunk of shots in the Monte-Carlo runner
_CHUNK_DRAWS = 1 << 22


class DilationError(ValueError):
    pass


def dilation_unitary(eta: float) -> np.ndarray:
    eta = float(eta)
    if not 0 < eta < 1:
        raise DilationError(f"eta must lie in (0, 1), got {eta}")
    s = math.sqrt((1 - eta) * (1 + eta))
    return np.array(
        [[1, 0, 0, 0], [0, eta, s, 0], [0, -s, eta, 0], [0, 0, 0, 1]],
        dtype=np.complex128,
    )


@dataclass(frozen=True)
class DilationStep:
    """``repeat`` rounds of ``U(eta)`` on (target, ancilla), each postselected on ancilla 0."""

    target: int
    ancilla: int
    eta: float
    repeat: int = 1

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise DilationError(f"eta must lie in (0, 1), got {self.eta}")
        if self.target == self.ancilla:
            raise DilationError(f"target and ancilla are both qubit {self.target}")
        if isinstance(self.repeat, bool) or not isinstance(self.repeat, (int, np.integer)) or self.repeat < 1:
            raise DilationError(f"repeat must be a positive integer, got {self.repeat!r}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.target, self.ancilla)

    @property
    def g(self) -> float:
        return self.eta**-0.5


def compile_G(g: float, target: int = 0, ancilla: int = 1, repeat: int = 1) -> tuple[float, DilationStep]:
    """Direct compilation of ``G(g)**repeat``; only ``g > 1`` is accepted here."""
    g = check_g(g)
    if g <= 1:
        raise DilationError(f"direct dilation needs g > 1, got {g}; use compile_circuit for g < 1")
    eta = 1 / (g * g)
    return eta, DilationStep(target, ancilla, eta, repeat)


@dataclass
class DilationProgram:
    """Unitary gates, dilation steps and terminal measurements on ``n_qubits``."""

    n_qubits: int
    ancilla: int | None
    items: list
    name: str = field(default="", compare=False)

    @property
    def steps(self) -> list[DilationStep]:
        return [op for op in self.items if isinstance(op, DilationStep)]

    @property
    def etas(self) -> list[float]:
        return [st.eta for st in self.steps]

    @property
    def base_qubits(self) -> int:
        return self.n_qubits - (self.ancilla is not None)

    @property
    def measured_qubits(self) -> list[int]:
        return [op.qubit for op in self.items if isinstance(op, Measure)]

    @property
    def log_eta_total(self) -> float:
        """``sum(repeat * ln eta)``: the log of the scale lost to postselection."""
        return sum(st.repeat * math.log(st.eta) for st in self.steps)

    def equivalent_circuit(self) -> Circuit:
        """The non-unitary circuit on the base register that the program implements."""
        ops = []
        for op in self.items:
            if isinstance(op, DilationStep):
                ops.append(G(op.target, op.g, op.repeat))
            else:
                ops.append(op)
        return Circuit(self.base_qubits, ops, name=self.name)

    def predicted_log_success(self, initial: ScaledState | None = None, capacity: int | None = None) -> float:
        """``ln`` of the survival probability: ``|M psi|^2 / |psi|^2 * prod(eta)``.

        Every kept branch equals the non-unitary image scaled by ``1/g`` per
        step, so the survival probability follows from one direct run.
        """
        c = self.equivalent_circuit()
        s0 = _base_initial(self.base_qubits, initial)
        out = simulate(c, s0, capacity=_capacity(capacity))
        return log_norm_squared(out) - log_norm_squared(s0) + self.log_eta_total

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "ancilla": self.ancilla,
            "steps": [
                {"index": i, "target": st.target, "eta": st.eta, "g": st.g, "repeat": st.repeat}
                for i, st in enumerate(self.steps)
            ],
        }


def _capacity(capacity: int | None) -> int:
    return capacity_from_env() if capacity is None else capacity


def _base_initial(n: int, initial) -> ScaledState:
    if initial is None:
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[0] = 1
        return from_amplitudes(amps)
    if isinstance(initial, ScaledState):
        if initial.n_qubits != n:
            raise DilationError(f"initial state has {initial.n_qubits} qubits, program base has {n}")
        return initial
    amps = np.asarray(initial, dtype=np.complex128)
    if amps.shape != (1 << n,):
        raise DilationError(f"initial amplitudes need shape ({1 << n},), got {amps.shape}")
    return from_amplitudes(amps)


def _svd_parts(m: np.ndarray) -> tuple[np.ndarray, float | None, np.ndarray]:
    """``m = scale * V @ G(g) @ Wh``; ``g`` is None when ``m`` is unitary up to scale."""
    v, sing, wh = np.linalg.svd(m)
    if sing[1] <= sing[0] * 1e-15:
        raise DilationError("singular U2 matrix cannot be dilated")
    ratio = sing[0] / sing[1]
    if ratio - 1 <= UNITARY_TOL:
        return v, None, wh
    return v, math.sqrt(ratio), wh


def _compile_g(target: int, g: float, repeat: int, ancilla: int) -> list:
    if g > 1:
        return [DilationStep(target, ancilla, 1 / (g * g), repeat)]
    # X G(1/g) X == G(g), and G(1/g) has eta = g^2
    return [X(target), DilationStep(target, ancilla, g * g, repeat), X(target)]


def compile_circuit(c: Circuit) -> DilationProgram:
    """Replace every non-unitary gate by dilation steps on one shared ancilla."""
    ancilla = c.n_qubits
    items: list = []
    for op in c.ops:
        if isinstance(op, (Measure, OracleRef)):
            items.append(op)
            continue
        kind = op.kind
        if kind is Kind.G:
            if op.power:
                items += _compile_g(op.target, op.g, op.power, ancilla)
        elif kind is Kind.CG:
            half = math.sqrt(op.g)
            ctl, tgt = op.control, op.target
            for sub in (X(ctl), CNOT(ctl, tgt), G(tgt, half), CNOT(ctl, tgt), X(ctl), G(tgt, half)):
                items += _compile_g(tgt, half, 1, ancilla) if sub.kind is Kind.G else [sub]
        elif kind is Kind.U2:
            v, g, wh = _svd_parts(np.array(op.matrix).reshape(2, 2))
            if g is None:
                items.append(U2(op.target, v @ wh))
            else:
                items += [U2(op.target, wh), *_compile_g(op.target, g, 1, ancilla), U2(op.target, v)]
        else:
            items.append(op)
    has_steps = any(isinstance(op, DilationStep) for op in items)
    n = c.n_qubits + 1 if has_steps else c.n_qubits
    return DilationProgram(n, ancilla if has_steps else None, items, name=c.name)


# -- exact execution ------------------------------------------------------------------


@dataclass
class PostselectedRun:
    """Outcome of an exact postselected run.

    ``state`` lives on the base register, normalized.  ``conditionals`` holds
    the probability of ancilla ``0`` at every postselection, given survival
    so far, when recording was requested.
    """

    state: ScaledState
    log_success: float
    step_log_success: list[float]
    conditionals: np.ndarray | None = None

    @property
    def success(self) -> float:
        return math.exp(self.log_success)

    @property
    def log10_success(self) -> float:
        return self.log_success / math.log(10)


def _extend(s: ScaledState) -> ScaledState:
    # ancilla is the new top qubit, prepared in |0>
    amps = np.concatenate([s.amps, np.zeros_like(s.amps)])
    return ScaledState(s.n_qubits + 1, amps, s.log_scale)


def _postselect_round(amps: np.ndarray, u: np.ndarray, step: DilationStep) -> tuple[np.ndarray, float]:
    """One ``U(eta)`` round; returns the ancilla-0 branch and its conditional probability."""
    amps = apply_2q(amps, u, step.target, step.ancilla)
    view = amps.reshape(-1, 2, 1 << step.ancilla)
    weights = np.abs(view) ** 2
    w0 = float(weights[:, 0, :].sum())
    w1 = float(weights[:, 1, :].sum())
    view[:, 1, :] = 0
    return amps, w0 / (w0 + w1)


def run_postselected_exact(
    p: DilationProgram,
    initial=None,
    record: bool = False,
    capacity: int | None = None,
) -> PostselectedRun:
    """Execute the program, collapsing the ancilla onto ``0`` after every round.

    The survival probability is the product of the per-round conditionals and
    is accumulated as a sum of logs.
    """
    limit = _capacity(capacity)
    if p.n_qubits > limit:
        raise CapacityError(f"program needs {p.n_qubits} qubits, capacity is {limit}")
    base = _base_initial(p.base_qubits, initial)
    s = _extend(base) if p.ancilla is not None else base
    total, per_step, conds = 0.0, [], []
    step_index = 0
    for op in p.items:
        if isinstance(op, Measure):
            continue
        if isinstance(op, OracleRef):
            s = simulate(Circuit(s.n_qubits, [op]), s, capacity=limit)
            continue
        if isinstance(op, GateOp):
            s = apply(s, op)
            continue
        u = dilation_unitary(op.eta)
        log_p = 0.0
        for k in range(op.repeat):
            amps, p0 = _postselect_round(s.amps, u, op)
            if p0 == 0:
                raise DilationError(f"dilation step {step_index} round {k}: postselection has probability zero")
            s = maybe_rescale(ScaledState(s.n_qubits, amps, s.log_scale))
            log_p += math.log(p0)
            if record:
                conds.append(p0)
        total += log_p
        per_step.append(log_p)
        step_index += 1
    if p.ancilla is not None:
        # ancilla is the top qubit and sits in |0>
        s = ScaledState(p.base_qubits, s.amps[: 1 << p.base_qubits].copy(), s.log_scale)
    final = from_amplitudes(s.normalized())
    return PostselectedRun(final, total, per_step, np.array(conds) if record else None)


# -- Monte Carlo ----------------------------------------------------------------------


@dataclass
class PostselectedShots:
    shots: int
    seed: int
    survived: int
    exact_success: float
    measured: list[int]
    counts: dict[str, int]
    rounds: int

    @property
    def discarded(self) -> int:
        return self.shots - self.survived

    @property
    def survival_rate(self) -> float:
        return self.survived / self.shots

    @property
    def sigma(self) -> float:
        p = self.exact_success
        return math.sqrt(p * (1 - p) / self.shots)

    def to_dict(self) -> dict:
        return {
            "shots": self.shots,
            "seed": self.seed,
            "survived": self.survived,
            "discarded_shots": self.discarded,
            "survival_rate": self.survival_rate,
            "exact_success": self.exact_success,
            "sigma": self.sigma,
            "rounds": self.rounds,
            "counts": dict(self.counts),
        }


def run_postselected_shots(
    p: DilationProgram,
    shots: int,
    seed: int = 0,
    initial=None,
    capacity: int | None = None,
) -> PostselectedShots:
    """Sample every postselection; a run is discarded at its first ancilla ``1``.

    Given survival so far, the state before each round is fixed, so round
    ``k`` of any shot succeeds with the exact conditional ``c_k``.  Shot
    ``i`` consumes counter positions ``i*(m+1) .. i*(m+1)+m`` of the seed's
    stream: ``m`` postselection draws, then one draw for the measured
    outcome of a surviving run.
    """
    if shots < 1:
        raise ValueError(f"shots must be at least 1, got {shots}")
    run = run_postselected_exact(p, initial, record=True, capacity=capacity)
    cond = run.conditionals
    m = cond.size
    measured = p.measured_qubits or list(range(p.base_qubits))
    dist = outcome_distribution(run.state, measured)
    cdf = np.cumsum(dist)
    cdf /= cdf[-1]
    per_shot = m + 1
    chunk = max(1, _CHUNK_DRAWS // per_shot)
    survived = 0
    tally = np.zeros(dist.size, dtype=np.int64)
    for first in range(0, shots, chunk):
        count = min(chunk, shots - first)
        u = rng.shot_uniforms(seed, count, per_shot, first_shot=first)
        alive = np.all(u[:, :m] < cond, axis=1) if m else np.ones(count, dtype=bool)
        survived += int(alive.sum())
        picks = np.minimum(np.searchsorted(cdf, u[alive, m], side="right"), dist.size - 1)
        tally += np.bincount(picks, minlength=dist.size)
    width = len(measured)
    counts = {format(i, f"0{width}b"): int(k) for i, k in enumerate(tally) if k}
    return PostselectedShots(shots, seed, survived, run.success, measured, counts, m)


def product_form_success(alpha_sq: float, beta_sq: float, eta: float, r: int) -> float:
    """``(|alpha|^2 + eta^2 |beta|^2)**r``: every round scored against the input weights.

    The renormalized state drifts toward ``|0>`` after each kept round, so
    this product underestimates the exact survival from
    :func:`telescoped_success` whenever ``r > 1`` and both weights are nonzero.
    """
    return (alpha_sq + eta * eta * beta_sq) ** r


def telescoped_success(alpha_sq: float, beta_sq: float, eta: float, r: int) -> float:
    """Exact survival ``|alpha|^2 + eta^(2r) |beta|^2`` of ``r`` rounds on one qubit."""
    return alpha_sq + math.exp(2 * r * math.log(eta)) * beta_sq


# -- text form ------------------------------------------------------------------------


def _format(op) -> str:
    if isinstance(op, DilationStep):
        base = f"dilate-step {op.target} {op.ancilla} {op.eta!r}"
        return base if op.repeat == 1 else f"{base} {op.repeat}"
    return format_instruction(op)


def serialize_program(p: DilationProgram) -> str:
    """Circuit text extended by ``dilate-step TARGET ANCILLA ETA [REPEAT]`` lines."""
    return serialize_circuit(Circuit(p.n_qubits, p.items), formatter=_format)


def _parse_step(toks, lineno):
    if len(toks) not in (4, 5):
        raise CircuitParseError("expected 'dilate-step TARGET ANCILLA ETA [REPEAT]'", lineno, toks[0][1])
    target = _int(toks[1], lineno, "target")
    ancilla = _int(toks[2], lineno, "ancilla")
    eta = _float(toks[3], lineno, "eta")
    repeat = _int(toks[4], lineno, "repeat count") if len(toks) == 5 else 1
    try:
        return DilationStep(target, ancilla, eta, repeat)
    except DilationError as exc:
        raise CircuitParseError(str(exc), lineno, toks[0][1]) from None


def parse_program(text: str, source=None) -> DilationProgram:
    c = parse_circuit(text, source=source, extra={"dilate-step": _parse_step})
    steps = [op for op in c.ops if isinstance(op, DilationStep)]
    ancillas = {st.ancilla for st in steps}
    if len(ancillas) > 1:
        raise DilationError(f"steps use several ancillas {sorted(ancillas)}; one shared ancilla expected")
    ancilla = ancillas.pop() if ancillas else None
    if ancilla is not None and ancilla != c.n_qubits - 1:
        raise DilationError(f"ancilla must be the top qubit {c.n_qubits - 1}, got {ancilla}")
    if ancilla is not None:
        for pos, op in enumerate(c.ops):
            if not isinstance(op, DilationStep) and ancilla in op.qubits:
                raise DilationError(f"op {pos} acts on the ancilla qubit {ancilla}")
    return DilationProgram(c.n_qubits, ancilla, c.ops, name=c.name)
