"""Deterministic random CNF instances for the test suite."""

import numpy as np

from nqc.cnf import CnfFormula


def random_kcnf(rng, n, m, k=3):
    clauses = []
    for _ in range(m):
        vs = rng.choice(np.arange(1, n + 1), size=min(k, n), replace=False)
        signs = rng.choice([-1, 1], size=vs.size)
        clauses.append(tuple(int(v * s) for v, s in zip(vs, signs)))
    return CnfFormula(n, tuple(clauses))


def unsat_instance(rng, n, extra=0):
    """All 2^3 sign patterns over three variables, plus random padding clauses."""
    vs = rng.choice(np.arange(1, n + 1), size=3, replace=False)
    clauses = []
    for mask in range(8):
        clauses.append(tuple(int(v if (mask >> i) & 1 else -v) for i, v in enumerate(vs)))
    pad = random_kcnf(rng, n, extra).clauses if extra else ()
    order = rng.permutation(len(clauses) + len(pad))
    allc = list(clauses) + list(pad)
    return CnfFormula(n, tuple(allc[i] for i in order))
