import math

import numpy as np
import pytest
from scipy.stats import chisquare

import oracles
from nqc import rng
from nqc.circuit import (
    CapacityError,
    Circuit,
    CircuitError,
    CircuitParseError,
    Measure,
    operator,
    parse_circuit,
    run_exact,
    run_shots,
    serialize_circuit,
    simulate,
)
from nqc.cnf import CnfFormula
from nqc.gates import CNOT, G, H, GateOp, Kind, T, U2, X
from nqc.state import from_amplitudes, log_norm_squared


def test_parse_single_g():
    c = parse_circuit("qubits 1\ng 0 2.0")
    assert c.n_qubits == 1
    assert c.ops == [GateOp(Kind.G, 0, g=2.0)]


@pytest.mark.parametrize(
    "text,line,column,match",
    [
        ("qubits 2\ncnot 0 0", 2, 1, "control"),
        ("qubits 1\ng 0 1.0", 2, 1, "g = 1"),
        ("qubits 1\ng 0 -3", 2, 1, "positive"),
        ("qubits 1\nh 0\n  frob 0", 3, 3, "unknown mnemonic"),
        ("qubits 1\nh 0 1", 2, 1, "takes 1"),
        ("qubits 1\nh 1", 2, 1, "out of range"),
        ("qubits 1\nh x", 2, 3, "integer"),
        ("qubits 1\ng 0 nan", 2, 5, "finite"),
        ("h 0", 1, 1, "qubits N"),
        ("# only a comment\n", 1, 1, "missing"),
        ("qubits 1\nmeasure 0\nh 0", 3, 1, "measured"),
        ("qubits 1\nmeasure 0\nmeasure 0", 3, 1, "twice"),
        ("qubits 2\noracle cnf nowhere.cnf anc 1", 2, 12, "cannot load"),
    ],
)
def test_parse_errors(text, line, column, match):
    with pytest.raises(CircuitParseError, match=match) as info:
        parse_circuit(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_parse_full_grammar(tmp_path):
    (tmp_path / "f.cnf").write_text("p cnf 2 1\n1 -2 0\n")
    text = """# demo
qubits 3
h 0   # hadamard
t 1
x 2
cnot 0 1
g 2 1.5
g 2 2.0 7
cg 1 0 0.25
u 0 0.0 0.0 1.0 0.0 1.0 0.0 0.0 -0.0
oracle cnf f.cnf anc 2
measure 2
"""
    c = parse_circuit(text, source=tmp_path / "demo.nqc")
    assert c.name == "demo"
    assert c.ops[5] == GateOp(Kind.G, 2, g=2.0, power=7)
    assert c.ops[7].matrix == (0j, 1 + 0j, 1 + 0j, complex(0, -0.0))
    oracle = c.ops[8]
    assert oracle.formula == CnfFormula(2, ((1, -2),)) and oracle.ancilla == 2
    again = parse_circuit(serialize_circuit(c), source=tmp_path / "demo.nqc")
    assert again == c
    assert serialize_circuit(again) == serialize_circuit(c)


def test_float_round_trip_is_bit_exact():
    rng_ = np.random.default_rng(0)
    for _ in range(200):
        g = float(np.exp(rng_.uniform(-20, 20)))
        if g == 1.0:
            continue
        m = rng_.normal(size=4) * 10.0 ** rng_.integers(-300, 300, size=4)
        c = Circuit(1, [G(0, g), U2(0, m + 1j * m[::-1])])
        back = parse_circuit(serialize_circuit(c))
        assert back.ops[0].g == g
        assert back.ops[1].matrix == c.ops[1].matrix


def test_circuit_validation():
    with pytest.raises(CircuitError):
        Circuit(1, [H(1)])
    with pytest.raises(CircuitError):
        Circuit(2, [Measure(0), CNOT(1, 0)])


def test_run_exact_examples():
    rep = run_exact(parse_circuit("qubits 1\nh 0\nmeasure 0"))
    assert rep.probabilities[0] == pytest.approx((0.5, 0.5), abs=1e-15)
    rep = run_exact(parse_circuit("qubits 1\nh 0\ng 0 2.0\nmeasure 0"))
    assert rep.probabilities[0][0] == pytest.approx(16 / 17, rel=1e-15)
    rep = run_exact(parse_circuit("qubits 3\n"))
    assert rep.measured == [0, 1, 2]
    assert rep.joint[0] == 1.0


def test_run_exact_report_fields():
    rep = run_exact(parse_circuit("qubits 2\nh 0\ng 0 3.0\nmeasure 0\nmeasure 1"))
    d = rep.to_dict()
    assert set(d) >= {"n_qubits", "measured", "probabilities", "norm_squared", "joint"}
    mantissa, log_part = rep.norm_squared
    assert mantissa * math.exp(log_part) == pytest.approx((9 + 1 / 9) / 2, rel=1e-14)


def test_shots_examples():
    c = parse_circuit("qubits 1\nh 0\nmeasure 0")
    rep = run_shots(c, 10**5, seed=11)
    freq = rep.counts.get("0", 0) / rep.shots
    assert abs(freq - 0.5) <= 3 * math.sqrt(0.25 / 10**5)
    det = run_shots(parse_circuit("qubits 1\nmeasure 0"), 500, seed=2)
    assert det.counts == {"0": 500}
    a = run_shots(c, 1000, seed=5)
    b = run_shots(c, 1000, seed=5)
    assert np.array_equal(a.outcomes, b.outcomes)
    assert not np.array_equal(a.outcomes, run_shots(c, 1000, seed=6).outcomes)


def test_shot_streams_are_position_addressed():
    full = rng.uniforms(9, 0, 200)
    for start in (0, 1, 3, 4, 37, 101):
        assert np.array_equal(rng.uniforms(9, start, 50), full[start : start + 50])
    # a later chunk of shots reproduces the tail of a longer run
    c = parse_circuit("qubits 2\nh 0\nh 1\nt 1\nh 1")
    whole = run_shots(c, 300, seed=4).outcomes
    from nqc.circuit import sample_outcomes

    dist = run_exact(c).joint
    assert np.array_equal(sample_outcomes(dist, 4, 100, first_shot=200), whole[200:])


def test_chi_square_against_exact():
    rng_ = np.random.default_rng(8)
    n = 3
    ops = [H(0), H(1), T(1), G(1, 1.7), CNOT(1, 2), H(2), G(0, 0.6)]
    c = Circuit(n, ops + [Measure(q) for q in range(n)])
    exact = run_exact(c).joint
    rep = run_shots(c, 10**5, seed=int(rng_.integers(1 << 30)))
    observed = np.array([rep.counts.get(rep.outcome_label(i), 0) for i in range(exact.size)])
    stat = chisquare(observed, exact * rep.shots)
    assert stat.pvalue > 0.001


def test_unitary_circuits_conserve_norm():
    rng_ = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng_.integers(1, 6))
        ops = []
        for _ in range(25):
            q = int(rng_.integers(n))
            choice = int(rng_.integers(4))
            if choice == 3 and n > 1:
                ops.append(CNOT(int((q + 1) % n), q))
            else:
                ops.append([H, T, X, H][choice](q))
        v = oracles.random_state(rng_, n)
        s0 = from_amplitudes(v)
        s1 = simulate(Circuit(n, ops), s0)
        assert abs(math.exp(log_norm_squared(s1) - log_norm_squared(s0)) - 1) <= 1e-12


def test_linearity_on_superpositions():
    rng_ = np.random.default_rng(2)
    for n in range(1, 5):
        ops = [H(0), G(0, 2.5), T(n - 1), X(0), G(n - 1, 0.7)]
        if n > 1:
            ops += [CNOT(0, 1), GateOp(Kind.CG, 1, control=0, g=1.3)]
        c = Circuit(n, ops)
        mat = operator(c)
        v = oracles.random_state(rng_, n)
        combo = sum(v[i] * mat[:, i] for i in range(v.size))
        got = simulate(c, from_amplitudes(v)).true_amplitudes()
        assert np.allclose(got, combo, atol=1e-12)


def test_long_g_chains_do_not_overflow():
    c = Circuit(1, [H(0)] + [G(0, 2.0)] * 10000 + [Measure(0)])
    rep = run_exact(c)
    assert rep.probabilities[0] == (1.0, 0.0)
    mantissa, log_part = rep.norm_squared
    expected = 2 * 10000 * math.log(2) - math.log(2)
    assert log_part + math.log(mantissa) == pytest.approx(expected, rel=1e-12)
    one = parse_circuit("qubits 1\nh 0\ng 0 2.0 1000000\nmeasure 0")
    assert run_exact(one).probabilities[0] == (1.0, 0.0)


def test_capacity_env(monkeypatch):
    monkeypatch.setenv("NQC_CAPACITY", "2")
    with pytest.raises(CapacityError):
        run_exact(Circuit(3, []))
    monkeypatch.setenv("NQC_CAPACITY", "bogus")
    with pytest.raises(CapacityError):
        run_exact(Circuit(1, []))
