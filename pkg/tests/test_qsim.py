import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlqc_lightcone.circuit import named_unitary
from nlqc_lightcone.qsim import (
    CliffordTableau,
    PauliString,
    StateVector,
    choi_from_kraus,
    clifford_conjugate,
    decompose_pauli,
    depolarizing_choi,
    diamond_bounds,
    identity_choi,
    kraus_from_choi,
    random_state,
    random_unitary,
    stinespring_isometry,
    trace_distance,
    unitary_choi,
)

LETTERS = {"I": np.eye(2), "X": named_unitary("X"), "Y": named_unitary("Y"), "Z": named_unitary("Z")}


def dense(label):
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, LETTERS[ch])
    return out


labels = st.text(alphabet="IXYZ", min_size=1, max_size=4)


@given(labels, st.data())
@settings(max_examples=80, deadline=None)
def test_pauli_product_matches_dense(a, data):
    b = data.draw(st.text(alphabet="IXYZ", min_size=len(a), max_size=len(a)))
    p, q = PauliString.from_label(a), PauliString.from_label(b)
    np.testing.assert_allclose((p * q).to_matrix(), dense(a) @ dense(b), atol=1e-12)


@given(labels)
@settings(max_examples=50, deadline=None)
def test_label_round_trip_and_decompose(a):
    p = PauliString.from_label(a)
    assert p.to_matrix().shape == (2 ** len(a),) * 2
    np.testing.assert_allclose(p.to_matrix(), dense(a), atol=1e-12)
    assert decompose_pauli(dense(a)) == p


def test_commutation_matches_matrices():
    for a, b in itertools.product(["XI", "ZZ", "YX", "IZ"], repeat=2):
        pa, pb = dense(a), dense(b)
        assert PauliString.from_label(a).commutes(PauliString.from_label(b)) == np.allclose(pa @ pb, pb @ pa)


def test_clifford_conjugation_examples():
    h = CliffordTableau.from_gates(1, [("H", [0])])
    assert clifford_conjugate(h, PauliString.from_label("X")).label() == "Z"
    cx = CliffordTableau.from_gates(2, [("CNOT", [0, 1])])
    assert clifford_conjugate(cx, PauliString.from_label("XI")).label() == "XX"
    assert clifford_conjugate(cx, PauliString.from_label("IZ")).label() == "ZZ"


def test_clifford_conjugation_matches_dense(rng):
    for _ in range(20):
        c = CliffordTableau.random(3, rng)
        u = c.to_unitary()
        p = PauliString.random(3, rng)
        np.testing.assert_allclose(c.conjugate(p).to_matrix(), u @ p.to_matrix() @ u.conj().T, atol=1e-10)
        assert c.is_symplectic()
        back = CliffordTableau.from_unitary(u)
        assert back.conjugate(p) == c.conjugate(p)


def test_non_clifford_rejected():
    with pytest.raises(ValueError):
        CliffordTableau.from_unitary(named_unitary("T"))


def test_statevector_unitary_against_kron(rng):
    amps = random_state(3, rng)
    sv = StateVector.from_amplitudes(amps, [("A", 1), ("B", 2)])
    u = random_unitary(4, rng)
    sv.apply_unitary(u, ["A", ("B", 1)])
    # oracle: reorder to (A, B1, B0), apply on first two
    swap = named_unitary("SWAP")
    full = np.kron(np.eye(2), swap) @ np.kron(u, np.eye(2)) @ np.kron(np.eye(2), swap)
    np.testing.assert_allclose(sv.vector(["A", "B"]), full @ amps, atol=1e-12)


def test_bell_measurement_statistics(rng):
    sv = StateVector.from_amplitudes(np.array([1, 0], dtype=complex), [("S", 1)])
    sv.allocate(("l", "r"), 2, "bell")
    counts = np.zeros(4)
    for seed in range(400):
        s = sv.copy()
        m = s.measure([("S", 0), ("l", 0)], np.random.default_rng(seed), basis="bell")
        counts[2 * m[0] + m[1]] += 1
    assert np.all(np.abs(counts / 400 - 0.25) < 0.08)


def test_diamond_bounds_identity_vs_depolarizing():
    lower, upper = diamond_bounds(identity_choi(2), depolarizing_choi(2))
    assert lower == pytest.approx(1.5, abs=1e-12)
    assert upper == pytest.approx(3.0, abs=1e-12)


def test_diamond_bounds_unitaries(rng):
    # for unitaries the diamond distance is 2 sqrt(1 - min overlap^2) >= lower
    u, v = random_unitary(2, rng), random_unitary(2, rng)
    lower, upper = diamond_bounds(unitary_choi(u), unitary_choi(v))
    ev = np.linalg.eigvals(u.conj().T @ v)
    ang = np.sort(np.angle(ev))
    spread = min(abs(ang[1] - ang[0]), 2 * np.pi - abs(ang[1] - ang[0]))
    exact = 2 * np.sin(spread / 2) if spread < np.pi else 2.0
    assert lower <= exact + 1e-9 <= upper + 1e-9


def test_kraus_and_stinespring_round_trip(rng):
    choi = depolarizing_choi(2, 0.3)
    again = choi_from_kraus(kraus_from_choi(choi))
    np.testing.assert_allclose(again.matrix, choi.matrix, atol=1e-12)
    v = stinespring_isometry(choi)
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)


def test_trace_distance_orthogonal():
    a = np.diag([1.0, 0.0]).astype(complex)
    b = np.diag([0.0, 1.0]).astype(complex)
    assert trace_distance(a, b) == pytest.approx(1.0)
