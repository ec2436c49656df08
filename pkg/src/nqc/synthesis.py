"""Single-qubit non-unitary synthesis and the C-G construction from CNOT and G.

A plan takes a nonzero qubit state of norm ``A`` to any nonzero state of
norm ``B``.  With ``f(c1, c2) = sqrt(|g c1|^2 + |c2 / g|^2)`` ranging over
``[A/g, g A]`` on the sphere of radius ``A``, the three cases are

* ``WITHIN_BAND``: ``B/A`` in ``[1/g, g]``; rotate to a point with
  ``f = B``, apply ``G`` once, rotate to the target.
* ``GROW``: rotate to ``(A, 0)``, apply ``G**r`` with
  ``r = floor(ln(B/A) / ln g)``, then finish as in the band case.
* ``SHRINK``: rotate to ``(0, A)`` and apply ``G**r`` with
  ``r = floor(-ln(B/A) / ln g)``, then finish as in the band case.

Execution order is ``pre``, ``G**r``, ``mid``, ``G`` (when ``use_g``),
``post``.  All rotations are exact 2x2 unitaries.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit
from .gates import CNOT, G, H_MATRIX, T_MATRIX, X, GateOp, Kind, check_g

BAND_TOL = 1e-12
EXACT_TOL = 1e-12
MAX_HT_DEPTH = 24
_IDENTITY = np.eye(2, dtype=np.complex128)


class SynthesisError(ValueError):
    pass


class Case(str, enum.Enum):
    WITHIN_BAND = "WITHIN_BAND"
    GROW = "GROW"
    SHRINK = "SHRINK"


@dataclass
class SynthesisPlan:
    """``post @ G**use_g @ mid @ G**r @ pre`` maps ``initial`` to ``final``."""

    case_tag: Case
    r: int
    pre_rotation: np.ndarray
    mid_rotation: np.ndarray
    post_rotation: np.ndarray
    g: float
    use_g: bool = True
    initial: np.ndarray | None = None
    final: np.ndarray | None = None

    def operator(self) -> np.ndarray:
        """The composite 2x2 matrix of the plan."""
        gr = np.diag([math.exp(self.r * math.log(self.g)), math.exp(-self.r * math.log(self.g))])
        mid_g = np.diag([self.g, 1 / self.g]) if self.use_g else _IDENTITY
        return self.post_rotation @ mid_g @ self.mid_rotation @ gr @ self.pre_rotation

    def ops(self, qubit: int = 0) -> list[GateOp]:
        """The plan as gate instructions on ``qubit``; identity rotations are dropped."""
        out: list[GateOp] = []

        def rot(m):
            if not np.allclose(m, _IDENTITY, atol=1e-15, rtol=0):
                out.append(GateOp(Kind.U2, qubit, matrix=tuple(m.reshape(-1))))

        rot(self.pre_rotation)
        if self.r:
            out.append(G(qubit, self.g, self.r))
        rot(self.mid_rotation)
        if self.use_g:
            out.append(G(qubit, self.g))
        rot(self.post_rotation)
        return out

    def to_dict(self) -> dict:
        def enc(m):
            return [[[z.real, z.imag] for z in row] for row in np.asarray(m)]

        return {
            "case": self.case_tag.value,
            "r": self.r,
            "g": self.g,
            "use_g": self.use_g,
            "pre_rotation": enc(self.pre_rotation),
            "mid_rotation": enc(self.mid_rotation),
            "post_rotation": enc(self.post_rotation),
        }


def _state(v, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    if v.shape != (2,):
        raise SynthesisError(f"{name}: expected a 2-component state, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise SynthesisError(f"{name}: entries must be finite")
    if np.linalg.norm(v) == 0:
        raise SynthesisError(f"{name}: zero-length state")
    return v


def rotation_between(u, v) -> np.ndarray:
    """Unitary ``R`` with ``R u`` parallel to ``v`` and ``R u = v`` when the norms agree.

    ``R = [v_hat, v_perp] [u_hat, u_perp]^dagger`` with
    ``x_perp = (-conj(x1), conj(x0)) / |x|``.
    """
    u = np.asarray(u, dtype=np.complex128)
    v = np.asarray(v, dtype=np.complex128)

    def frame(x):
        x = x / np.linalg.norm(x)
        return np.array([[x[0], -np.conj(x[1])], [x[1], np.conj(x[0])]])

    return frame(v) @ frame(u).conj().T


def norm_match_point(A: float, B: float, g: float) -> tuple[float, float]:
    """Real nonnegative ``(|c1|, |c2|)`` on the radius-``A`` sphere with ``f = B``."""
    g = check_g(g)
    if g <= 1:
        raise SynthesisError(f"g must exceed 1, got {g}")
    if not (A > 0 and math.isfinite(A)) or not (B > 0 and math.isfinite(B)):
        raise SynthesisError(f"A and B must be finite positive reals, got A={A}, B={B}")
    lo, hi = A / g, A * g
    if not lo * (1 - BAND_TOL) <= B <= hi * (1 + BAND_TOL):
        raise SynthesisError(f"B={B} outside the reachable band [{lo}, {hi}]")
    t = (B * B - A * A / (g * g)) / (g * g - 1 / (g * g))
    t = min(max(t, 0.0), A * A)
    return math.sqrt(t), math.sqrt(A * A - t)


def _classify(ratio: float, g: float) -> Case:
    if ratio > g * (1 + BAND_TOL):
        return Case.GROW
    if ratio < (1 - BAND_TOL) / g:
        return Case.SHRINK
    return Case.WITHIN_BAND


def _grow(v: np.ndarray, g: float, r: int) -> np.ndarray:
    """``G(g)**r`` applied to a 2-vector."""
    if not r:
        return v
    shift = r * math.log(g)
    return v * np.array([math.exp(shift), math.exp(-shift)])


def plan_single_qubit(initial, final, g: float) -> SynthesisPlan:
    """Plan a rotation, ``G**r``, rotation, ``G``, rotation sequence from ``initial`` to ``final``."""
    initial = _state(initial, "initial")
    final = _state(final, "final")
    g = check_g(g)
    if g <= 1:
        raise SynthesisError(f"g must exceed 1, got {g}")
    A = float(np.linalg.norm(initial))
    B = float(np.linalg.norm(final))
    ratio = B / A
    case = _classify(ratio, g)
    log_g = math.log(g)

    if case is Case.GROW:
        r = math.floor(math.log(ratio) / log_g)
        pre = rotation_between(initial, [1, 0])
    elif case is Case.SHRINK:
        r = math.floor(-math.log(ratio) / log_g)
        pre = rotation_between(initial, [0, 1])
    else:
        r = 0
        pre = _IDENTITY.copy()
    # follow the actual floating-point trajectory so later stages absorb
    # the rounding residue left by the pre-rotation
    current = _grow(pre @ initial, g, r)
    a_mid = float(np.linalg.norm(current))
    if case is Case.WITHIN_BAND and abs(B - A) <= EXACT_TOL * A:
        # no norm change needed: a single rotation does the job
        post = rotation_between(current, final)
        return SynthesisPlan(case, r, pre, _IDENTITY.copy(), post, g, False, initial, final)
    c1, c2 = norm_match_point(a_mid, B, g)
    mid = rotation_between(current, [c1, c2])
    post = rotation_between(_grow(mid @ current, g, 1), final)
    return SynthesisPlan(case, r, pre, mid, post, g, True, initial, final)


def execute_plan(plan: SynthesisPlan, initial) -> np.ndarray:
    """Apply the stages one after another.

    Stage-wise application keeps the exact zero produced by the pre-rotation;
    multiplying by the composite matrix instead lets ``G**r`` amplify its
    rounding residue.
    """
    v = _grow(plan.pre_rotation @ _state(initial, "initial"), plan.g, plan.r)
    v = _grow(plan.mid_rotation @ v, plan.g, int(plan.use_g))
    return plan.post_rotation @ v


def build_cg_from_primitives(g: float, control: int = 1, target: int = 0) -> Circuit:
    """Two-qubit circuit realising C-G with parameter ``g**2`` from X, CNOT and G(g).

    Sequence: X on control, CNOT, G on target, CNOT, X on control, G on target.
    With the default placement the basis index reads ``|control target>``.
    """
    g = check_g(g)
    if {control, target} != {0, 1}:
        raise SynthesisError("control and target must be the two distinct qubits 0 and 1")
    ops = [X(control), CNOT(control, target), G(target, g), CNOT(control, target), X(control), G(target, g)]
    return Circuit(2, ops, name="cg")


# -- H/T approximation -----------------------------------------------------------------


@dataclass
class HTApproximation:
    word: str
    error: float
    matrix: np.ndarray
    depth_searched: int
    explored: int


def word_matrix(word: str) -> np.ndarray:
    """Operator of a word read in time order, so ``"HT"`` is ``T @ H``."""
    m = _IDENTITY.copy()
    for letter in word:
        if letter == "H":
            m = H_MATRIX @ m
        elif letter == "T":
            m = T_MATRIX @ m
        else:
            raise SynthesisError(f"word letters must be H or T, got {letter!r}")
    return m


def phase_free_error(target: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """``min_phi ||target - e^{i phi} V||_op`` for a stack of 2x2 unitaries ``V``.

    With eigenphases of ``V^dagger target`` separated by an arc ``delta`` the
    distance is ``2 sin(delta / 4)``.
    """
    w = np.conj(np.swapaxes(candidates, -1, -2)) @ target
    det = w[..., 0, 0] * w[..., 1, 1] - w[..., 0, 1] * w[..., 1, 0]
    w = w / np.sqrt(det)[..., None, None]
    half_tr = (w[..., 0, 0] + w[..., 1, 1]) / 2
    traceless = w - half_tr[..., None, None] * _IDENTITY
    s = np.sqrt(np.sum(np.abs(traceless) ** 2, axis=(-1, -2)) / 2)
    alpha = np.arctan2(s, np.abs(half_tr.real))
    return 2 * np.sin(alpha / 2)


def _phase_keys(mats: np.ndarray) -> list[bytes]:
    flat = mats.reshape(-1, 4)
    col = flat[:, [0, 2]]
    pick = np.argmax(np.abs(col), axis=1)
    ref = col[np.arange(len(col)), pick]
    canon = flat * (np.abs(ref) / ref)[:, None]
    q = np.round(np.concatenate([canon.real, canon.imag], axis=1) * 1e10).astype(np.int64)
    q[q == 0] = 0
    return [row.tobytes() for row in q]


def approximate_unitary_HT(target, max_depth: int = 12) -> HTApproximation:
    """Best ``{H, T}`` word of length at most ``max_depth`` up to global phase.

    Breadth-first search in (length, lexicographic with H < T) order; a word
    whose operator repeats an earlier one up to phase is pruned.  A later word
    replaces the incumbent only if it is better by more than ``1e-12``.
    """
    target = np.asarray(target, dtype=np.complex128)
    if target.shape != (2, 2):
        raise SynthesisError(f"target: expected a 2x2 matrix, got shape {target.shape}")
    if np.max(np.abs(target.conj().T @ target - _IDENTITY)) > 1e-12:
        raise SynthesisError("target: not unitary within 1e-12")
    if not 0 <= max_depth <= MAX_HT_DEPTH:
        raise SynthesisError(f"max_depth must be in [0, {MAX_HT_DEPTH}], got {max_depth}")

    letters = np.stack([H_MATRIX, T_MATRIX])
    frontier = _IDENTITY[None].copy()
    words = [""]
    seen = set(_phase_keys(frontier))
    best_word, best_err, best_mat = "", float(phase_free_error(target, frontier)[0]), _IDENTITY.copy()
    explored, depth = 1, 0
    while depth < max_depth and best_err > EXACT_TOL and len(words):
        depth += 1
        children = np.einsum("lij,njk->nlik", letters, frontier).reshape(-1, 2, 2)
        keep, new_words = [], []
        for i, key in enumerate(_phase_keys(children)):
            if key not in seen:
                seen.add(key)
                keep.append(i)
                new_words.append(words[i // 2] + "HT"[i % 2])
        frontier, words = children[keep], new_words
        explored += len(words)
        if not words:
            break
        errs = phase_free_error(target, frontier)
        # first word within tolerance of the level minimum keeps the lexicographic tie rule
        i = int(np.flatnonzero(errs <= errs.min() + EXACT_TOL)[0])
        if errs[i] < best_err - EXACT_TOL:
            best_word, best_err, best_mat = words[i], float(errs[i]), frontier[i]
    return HTApproximation(best_word, best_err, best_mat, depth, explored)
