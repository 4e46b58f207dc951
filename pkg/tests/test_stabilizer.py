import random
from fractions import Fraction
from functools import reduce

import numpy as np
import pytest

from opaqnet import dense, randomized
from opaqnet.stabilizer import (
    BasisPrep,
    PauliCoefficients,
    PauliString,
    Tableau,
    apply_branch,
    apply_clifford,
    apply_projection,
    apply_replacement,
    den_coefficients,
    init_tableau,
    reduce_to,
    to_dense,
    weight,
)
from opaqnet.stabilizer.pauli import InterfaceTooLarge
from opaqnet.stabilizer.tableau import apply_prep, apply_step, canonical_generators, is_valid

P = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
}


def pauli(letters, regs, n, sign=1):
    return PauliString.from_letters(letters, regs, n, sign)


def rows_of(*strings):
    return tuple((p.x, p.z, p.phase) for p in strings)


def test_init_all_zero():
    g = init_tableau(BasisPrep(("0", "0", "0")), 3)
    assert g.weight == 1
    assert canonical_generators(g.generators, 3) == canonical_generators(
        rows_of(*(pauli("Z", [i], 3) for i in range(3))), 3
    )


def test_init_plus():
    g = init_tableau(BasisPrep(("+",)), 1)
    assert g.generators == rows_of(pauli("X", [0], 1))


def test_init_repeater(repeater):
    g = init_tableau(repeater.initial_prep(), repeater.n)
    idx = repeater.register_index
    q = [idx[r] for r in ("q1", "q2", "q3", "q4", "qM")]
    want = rows_of(
        pauli("XX", q[0:2], 5),
        pauli("ZZ", q[0:2], 5),
        pauli("XX", q[2:4], 5),
        pauli("ZZ", q[2:4], 5),
        pauli("Z", [q[4]], 5),
    )
    assert g.weight == 1
    assert canonical_generators(g.generators, 5) == canonical_generators(want, 5)


def test_hadamard_and_bell():
    g = apply_clifford(init_tableau(BasisPrep(("0",)), 1), "H", (0,))
    assert g.generators == rows_of(pauli("X", [0], 1))
    bell = apply_clifford(init_tableau(BasisPrep(("+", "0")), 2), "CNOT", (0, 1))
    assert canonical_generators(bell.generators, 2) == canonical_generators(
        rows_of(pauli("XX", [0, 1], 2), pauli("ZZ", [0, 1], 2)), 2
    )


def test_bsm_rotation_matches_dense(repeater):
    idx = repeater.register_index
    prep = repeater.initial_prep()
    g = init_tableau(prep, 5)
    g = apply_clifford(g, "CNOT", (idx["q2"], idx["q3"]))
    g = apply_clifford(g, "H", (idx["q2"],))
    rho = dense.prep_density(prep, 5)
    U = dense.gate_matrix("H", (idx["q2"],), 5) @ dense.gate_matrix("CNOT", (idx["q2"], idx["q3"]), 5)
    rho = U @ rho @ U.conj().T
    assert np.abs(den_coefficients(g).to_dense() - rho).max() < 1e-12


def test_projection_cases():
    zero = init_tableau(BasisPrep(("0",)), 1)
    plus = init_tableau(BasisPrep(("+",)), 1)
    z = pauli("Z", [0], 1)
    assert apply_projection(zero, z, 1) == zero
    assert apply_projection(zero, z, -1).weight == 0
    g = apply_projection(plus, z, 1)
    # dense oracle: Tr(P|+><+|P) for P=|0><0|
    ket = np.array([1, 1]) / np.sqrt(2)
    assert abs(float(g.weight) - abs(ket[0]) ** 2) < 1e-15
    assert g.weight == Fraction(1, 2)
    assert g.same_state(Tableau(1, Fraction(1, 2), zero.generators))


def test_weight_examples():
    g = init_tableau(BasisPrep(("+", "0")), 2)
    assert weight(g) == 1
    g = apply_projection(g, pauli("Z", [0], 2), 1)
    assert weight(g) == Fraction(1, 2)
    g = apply_projection(g, pauli("Z", [0], 2), -1)
    assert weight(g) == 0


def test_identity_branch_is_noop():
    g = init_tableau(BasisPrep(("+", "1")), 2)
    assert apply_branch(g, ()) == g


def _branch(model, tid, outcome):
    t = model.transition(tid)
    return next(b for b in t.branches if b.outcome == outcome)


def test_swap_branch_weight_quarter(repeater):
    b = _branch(repeater, "t_swap_nonsec", "00")
    g = apply_branch(init_tableau(repeater.initial_prep(), 5), b)
    rho = dense.dense_apply_branch(dense.prep_density(repeater.initial_prep(), 5), b, 5)
    assert abs(np.trace(rho).real - 0.25) < 1e-12
    assert g.weight == Fraction(1, 4)


def test_purification_branch_entangles_memory(repeater):
    idx = repeater.register_index
    for r in ("00", "01", "10", "11"):
        g = apply_branch(init_tableau(repeater.initial_prep(), 5), _branch(repeater, "t_pur_sec", r))
        assert g.weight == Fraction(1, 4)
        red = reduce_to(g, [idx["qM"]], ["qM"])
        assert red.normalized().coeffs == {"I": Fraction(1, 2)}


def test_reduce_examples(repeater):
    bell = init_tableau(BasisPrep(("+", "0"), (("CNOT", (0, 1)),)), 2)
    assert reduce_to(bell, [0]).coeffs == {"I": Fraction(1, 2)}
    idx = repeater.register_index
    g0 = init_tableau(repeater.initial_prep(), 5)
    assert reduce_to(g0, [idx["qM"]]).coeffs == {"I": Fraction(1, 2), "Z": Fraction(1, 2)}
    ghz = init_tableau(BasisPrep(("+", "0", "0"), (("CNOT", (0, 1)), ("CNOT", (1, 2)))), 3)
    assert reduce_to(ghz, [2]).coeffs == {"I": Fraction(1, 2)}


def test_replacement_examples(repeater):
    prep = repeater.initial_prep()
    g0 = init_tableau(prep, 5)
    g = apply_projection(apply_projection(g0, pauli("X", [0], 5), 1), pauli("Z", [1], 5), 1)
    assert g.weight == Fraction(1, 4)
    r = apply_replacement(g, prep)
    assert r.weight == Fraction(1, 4) and r.same_state(Tableau(5, Fraction(1, 4), g0.generators))
    dead = apply_projection(g0, pauli("Z", [4], 5), -1)
    assert apply_replacement(dead, prep).weight == 0
    assert apply_replacement(g0, prep).same_state(g0)


def test_to_dense_examples():
    assert np.allclose(to_dense(PauliCoefficients(("a",), {"I": Fraction(1, 2)})), np.eye(2) / 2)
    zero = PauliCoefficients(("a",), {"I": Fraction(1, 2), "Z": Fraction(1, 2)})
    assert np.allclose(to_dense(zero), np.diag([1, 0]))


def test_to_dense_random_two_qubit():
    rng = random.Random(5)
    for _ in range(20):
        coeffs = {a + b: Fraction(rng.randint(-4, 4), 8) for a in "IXYZ" for b in "IXYZ" if rng.random() < 0.5}
        want = sum((float(v) * np.kron(P[k[0]], P[k[1]]) for k, v in coeffs.items()), np.zeros((4, 4), complex))
        assert np.abs(to_dense(PauliCoefficients(("a", "b"), coeffs)) - want).max() < 1e-15


def test_to_dense_limit():
    with pytest.raises(InterfaceTooLarge):
        to_dense(PauliCoefficients.zero(tuple(f"r{i}" for i in range(9))))


def test_full_reduction_is_denotation():
    rng = random.Random(6)
    for _ in range(30):
        n = rng.randint(1, 4)
        g = init_tableau(randomized.random_prep(rng, n), n)
        for st in randomized.random_program(rng, n, 8):
            g = apply_step(g, st)
        full = reduce_to(g, range(n))
        brute = np.zeros((2**n, 2**n), complex)
        for lab, v in full.coeffs.items():
            brute += float(v) * reduce(np.kron, (P[c] for c in lab))
        assert np.abs(full.to_dense() - brute).max() < 1e-14


def test_oracle_suite_thirty_step_programs():
    cases = randomized.oracle_suite(60, 4, seed=11, max_length=30)
    assert all(c.ok for c in cases), [c.detail for c in cases if not c.ok]


def test_weight_monotone_and_clifford_invariant():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(1, 4)
        g = init_tableau(randomized.random_prep(rng, n), n)
        for st in randomized.random_program(rng, n, 10):
            g2 = apply_step(g, st)
            if st[0] == "gate":
                assert g2.weight == g.weight
            assert g2.weight <= g.weight
            assert is_valid(g2)
            g = g2


def test_independent_steps_commute():
    rng = random.Random(8)
    for _ in range(100):
        n = 4
        g = init_tableau(randomized.random_prep(rng, n, gates=4), n)
        # two programs acting on disjoint halves
        a = [st for st in randomized.random_program(rng, 2, 4) if st[0] in ("gate", "project", "prep")]
        b = [st for st in randomized.random_program(rng, 2, 4) if st[0] in ("gate", "project", "prep")]
        a = [_shift(st, 0) for st in a]
        b = [_shift(st, 2) for st in b]
        ab = apply_branch(apply_branch(g, a), b)
        ba = apply_branch(apply_branch(g, b), a)
        assert den_coefficients(ab).coeffs == den_coefficients(ba).coeffs


def _shift(st, k):
    n = 4
    if st[0] == "gate":
        return ("gate", st[1], tuple(r + k for r in st[2]))
    if st[0] == "prep":
        return ("prep", st[1] + k, st[2])
    p = st[1]
    return ("project", PauliString(n, p.x << k, p.z << k, p.sign), st[2])


def test_prep_discards_register():
    bell = init_tableau(BasisPrep(("+", "0"), (("CNOT", (0, 1)),)), 2)
    g = apply_prep(bell, 1, "1")
    assert reduce_to(g, [0]).coeffs == {"I": Fraction(1, 2)}
    assert reduce_to(g, [1]).coeffs == {"I": Fraction(1, 2), "Z": Fraction(-1, 2)}


def test_bad_gate_arguments():
    g = init_tableau(BasisPrep(("0", "0")), 2)
    with pytest.raises(ValueError):
        apply_clifford(g, "T", (0,))
    with pytest.raises(IndexError):
        apply_clifford(g, "H", (5,))
    with pytest.raises(ValueError):
        apply_clifford(g, "CNOT", (1, 1))
