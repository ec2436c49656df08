"""Matrix-free application of the SAT oracle ``O = P_s (x) I + (I - P_s) (x) X``."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .cnf import CnfFormula, truth_table
from .state import ScaledState


class OracleError(ValueError):
    pass


def apply_oracle(
    s: ScaledState,
    f: CnfFormula,
    work_qubits: Sequence[int],
    ancilla: int,
    table: np.ndarray | None = None,
) -> ScaledState:
    """Flip ``ancilla`` on every work-register basis state with ``f(j) = 0``.

    Variable ``k`` of ``f`` lives on ``work_qubits[k - 1]``.  ``table`` may
    carry a precomputed :func:`truth_table` for repeated calls.
    """
    work = [int(q) for q in work_qubits]
    n = s.n_qubits
    if len(work) != f.num_vars:
        raise OracleError(f"work register has {len(work)} qubits, formula has {f.num_vars} variables")
    if len(set(work)) != len(work):
        raise OracleError("work register lists a qubit twice")
    if ancilla in work:
        raise OracleError(f"ancilla {ancilla} overlaps the work register")
    for q in (*work, ancilla):
        if not 0 <= q < n:
            raise OracleError(f"qubit {q} out of range for {n} qubits")
    if table is None:
        table = truth_table(f)
    rejected = ~table
    if not rejected.any():
        return s.copy()

    # axis order after transpose: spectators, ancilla, work[-1], ..., work[0]
    def axis(q):
        return n - 1 - q

    rest = [q for q in range(n - 1, -1, -1) if q != ancilla and q not in work]
    order = [axis(q) for q in rest] + [axis(ancilla)] + [axis(q) for q in reversed(work)]
    tensor = s.amps.reshape([2] * n).transpose(order)
    flat = tensor.reshape(-1, 2, 1 << len(work)).copy()
    swapped = flat[:, ::-1, :][:, :, rejected]
    flat[:, :, rejected] = swapped
    out = flat.reshape([2] * n).transpose(np.argsort(order)).reshape(-1)
    return ScaledState(n, out, s.log_scale)
