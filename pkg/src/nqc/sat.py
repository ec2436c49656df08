"""SAT / NONSAT decision and model counting with the G-amplified oracle circuit.

Register layout for an ``n``-variable formula: work qubits ``0 .. n-1``
(variable ``k`` on qubit ``k-1``) and the non-Hermitian ancilla on qubit
``n``.  The circuit is ``H`` on every work qubit, the oracle, ``G(g)**r`` on
the ancilla, then a measurement of the ancilla; outcome ``0`` accepts.

After the oracle, satisfying assignments sit in the ancilla-0 branch and
the rest in the ancilla-1 branch, so the acceptance probability is::

    P = K g^{2r} / (K g^{2r} + (N - K) g^{-2r}),   N = 2^n, K = #models
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from scipy.stats import binomtest

from .circuit import CapacityError, Circuit, Measure, OracleRef, capacity_from_env, run_shots, simulate
from .cnf import CnfFormula, brute_force_count
from .gates import GateOp, Kind, check_g
from .state import measure_probabilities

ACCEPT_THRESHOLD = 2 / 3
REJECT_THRESHOLD = 1 / 3
# exp(-745) is the smallest positive double
_UNDERFLOW_LOG = 700.0


class NonInvertibleError(ValueError):
    """The acceptance probability does not determine the model count."""


def choose_r(n: int, g: float) -> int:
    """Smallest ``r`` with ``g**r >= 2**n``; then ``P >= N/(N+1)`` whenever a model exists."""
    g = check_g(g)
    if g <= 1:
        raise ValueError(f"choose_r needs g > 1, got {g}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    x = n * math.log(2) / math.log(g)
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, x):
        return int(nearest)
    return math.ceil(x)


def log_odds_term(N: int, K: int, g: float, r: int) -> float:
    """``ln(((N - K) / K) g^{-4r})`` for ``0 < K < N``."""
    return math.log(N - K) - math.log(K) - 4 * r * math.log(g)


def closed_form_P(N: int, K: int, g: float, r: int) -> float:
    if not 0 <= K <= N:
        raise ValueError(f"need 0 <= K <= N, got K={K}, N={N}")
    if K == 0:
        return 0.0
    if K == N:
        return 1.0
    return float(expit(-log_odds_term(N, K, g, r)))


def invert_P(P: float, N: int, g: float, r: int) -> int:
    """Model count from an acceptance probability: ``K = round(N rho / (1 + rho))``.

    ``rho = P / (1 - P) * g^{-4r}``.  Loses precision as ``P -> 1``; prefer
    :func:`invert_odds` when both branch weights are available.
    """
    if P <= 0:
        return 0
    if P >= 1:
        return N
    return invert_odds(math.log(P) - math.log1p(-P), N, g, r)


def invert_odds(log_odds: float, N: int, g: float, r: int) -> int:
    """Same inversion from ``ln(P / (1 - P))`` computed without cancellation."""
    log_rho = log_odds - 4 * r * math.log(g)
    return int(round(N * float(expit(log_rho))))


def sat_circuit(f: CnfFormula, g: float, r: int, path: str = "<formula>") -> Circuit:
    n = f.num_vars
    ops: list = [GateOp(Kind.H, q) for q in range(n)]
    ops.append(OracleRef(path, n, f))
    if r > 0:
        ops.append(GateOp(Kind.G, n, g=g, power=r))
    ops.append(Measure(n))
    return Circuit(n + 1, ops, name="sat")


@dataclass
class SatRunReport:
    n: int
    N: int
    r: int
    g: float
    p_accept: float
    p_reject: float
    decision: str
    mode: str = "exact"
    K_bruteforce: int | None = None
    count_estimate: int | None = None
    shots: int = 0
    seed: int | None = None
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "N": self.N,
            "r": self.r,
            "g": self.g,
            "mode": self.mode,
            "p_accept": self.p_accept,
            "p_reject": self.p_reject,
            "decision": self.decision,
        }
        if self.K_bruteforce is not None:
            out["K_bruteforce"] = self.K_bruteforce
        if self.count_estimate is not None:
            out["count_estimate"] = self.count_estimate
        if self.shots:
            out.update(shots=self.shots, seed=self.seed, counts=self.counts)
        return out


def decide(p_accept: float) -> str:
    if p_accept > ACCEPT_THRESHOLD:
        return "SAT"
    if p_accept < REJECT_THRESHOLD:
        return "UNSAT"
    return "UNDECIDED"


def _prepare(f: CnfFormula, g: float, r: int | None, capacity: int | None) -> tuple[float, int, int]:
    limit = capacity_from_env() if capacity is None else capacity
    if f.num_vars > limit:
        raise CapacityError(f"{f.num_vars} variables exceed capacity {limit}")
    g = check_g(g)
    if r is None:
        r = choose_r(f.num_vars, g)
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or r < 0:
        raise ValueError(f"r must be a nonnegative integer, got {r!r}")
    return g, int(r), limit


def solve_sat(
    f: CnfFormula,
    g: float = 2.0,
    r: int | None = None,
    mode: str = "exact",
    shots: int = 0,
    seed: int = 0,
    capacity: int | None = None,
    verify: bool = False,
) -> SatRunReport:
    """Run the amplified-oracle circuit and decide satisfiability.

    ``mode="exact"`` reads the acceptance probability off the final state;
    ``mode="shots"`` estimates it from ``shots`` samples of the ancilla.
    """
    g, r, limit = _prepare(f, g, r, capacity)
    n = f.num_vars
    circuit = sat_circuit(f, g, r)
    if mode == "exact":
        s = simulate(circuit, capacity=limit + 1)
        p0, p1 = measure_probabilities(s, n)
        report = SatRunReport(n, 1 << n, r, g, p0, p1, decide(p0))
    elif mode == "shots":
        if shots < 1:
            raise ValueError("shots mode needs shots >= 1")
        run = run_shots(circuit, shots, seed, capacity=limit + 1)
        accepted = run.counts.get("0", 0)
        p_hat = accepted / shots
        report = SatRunReport(
            n, 1 << n, r, g, p_hat, 1 - p_hat, decide(p_hat), mode="shots", shots=shots, seed=seed, counts=run.counts
        )
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if verify:
        report.K_bruteforce = brute_force_count(f)
    return report


@dataclass
class CountEstimate:
    estimate: int | None
    low: int
    high: int
    mode: str
    r: int
    invertible: bool = True
    p_accept: float | None = None

    def to_dict(self) -> dict:
        return {
            "count_estimate": self.estimate,
            "interval": [self.low, self.high],
            "mode": self.mode,
            "r": self.r,
            "invertible": self.invertible,
            "p_accept": self.p_accept,
        }


def count_models(
    f: CnfFormula,
    g: float = 2.0,
    r: int | None = None,
    mode: str = "exact",
    shots: int = 0,
    seed: int = 0,
    capacity: int | None = None,
    confidence: float = 0.997,
) -> CountEstimate:
    """Recover ``K`` by inverting the acceptance probability.

    Exact mode uses both branch weights of the ancilla so the odds keep full
    precision even when ``P`` rounds to 1.  Shots mode samples at ``r = 0``,
    where ``P = K / N``, and returns a Clopper-Pearson interval on ``K``.
    """
    N = 1 << f.num_vars
    if mode == "exact":
        g, r, limit = _prepare(f, g, r, capacity)
        s = simulate(sat_circuit(f, g, r), capacity=limit + 1)
        p0, p1 = measure_probabilities(s, f.num_vars)
        if p0 == 0:
            k = 0
        elif p1 == 0:
            if 4 * r * math.log(g) + math.log(N) > _UNDERFLOW_LOG:
                raise NonInvertibleError("rejecting branch underflowed; lower r to count models")
            k = N
        else:
            k = invert_odds(math.log(p0) - math.log(p1), N, g, r)
        return CountEstimate(k, k, k, "exact", r, p_accept=p0)
    if mode == "shots":
        report = solve_sat(f, g, 0, mode="shots", shots=shots, seed=seed, capacity=capacity)
        accepted = report.counts.get("0", 0)
        ci = binomtest(accepted, shots).proportion_ci(confidence_level=confidence, method="exact")
        low = math.ceil(N * ci.low - 1e-9)
        high = math.floor(N * ci.high + 1e-9)
        point = round(N * accepted / shots)
        if low > high:
            low = high = point
        invertible = 0 < accepted < shots
        return CountEstimate(point if invertible else None, low, high, "shots", 0, invertible, report.p_accept)
    raise ValueError(f"unknown mode {mode!r}")
