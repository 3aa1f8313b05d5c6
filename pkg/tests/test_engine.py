import numpy as np
import pytest

from nlqc_lightcone import corpus
from nlqc_lightcone.circuit import CircuitError, CircuitStructure, GateId, named_unitary
from nlqc_lightcone.costmodel import entanglement_cost, error_budget
from nlqc_lightcone.engine import (
    BOB,
    Alice,
    MessageLedger,
    NoSignallingViolation,
    ProtocolSpec,
    RegisterBudgetError,
    ResourceLabel,
    whole_register_required_ports,
    complete_isometry,
    event_rng,
    make_input,
    run_whole_register,
    run_protocol,
    run_spec,
    with_clifford_sandwich,
    with_isometric_prepost,
    with_local_prepost,
)
from nlqc_lightcone.qsim import CliffordTableau, random_unitary

from oracles import dense_unitary


def direct_output(u_logical, inp, n_ref):
    """Oracle: (U (x) I_R)|psi> as a density matrix on (A, B, R)."""
    names = [nm for nm in ("A", "B", "R") if nm in inp]
    psi = inp.vector(names)
    out = np.kron(u_logical, np.eye(2**n_ref)) @ psi
    return np.outer(out, out.conj())


def fidelity(rho, sigma_pure):
    w, v = np.linalg.eigh(sigma_pure)
    psi = v[:, -1]
    return float(np.real(psi.conj() @ rho @ psi))


def test_ideal_matches_direct_application(rng):
    for trial in range(15):
        n = int(rng.integers(2, 6))
        cs = corpus.random_circuit(n, int(rng.integers(1, 4)), 2, rng)
        inp = make_input(n // 2, n - n // 2, 1, rng)
        out = run_protocol(cs, inp, N=3, seed=trial)
        assert fidelity(out.final_rho, direct_output(dense_unitary(cs), inp, 1)) > 1 - 1e-9
        assert out.ledger.pre_round_count == 0


def test_odd_n_alice_holds_floor_half(rng):
    cs = corpus.random_circuit(3, 2, 2, rng)
    out = run_protocol(cs, make_input(1, 2, 1, rng), N=2, seed=4)
    assert out.fidelity > 1 - 1e-9


def test_same_seed_same_outcome(rng):
    cs = corpus.brickwork(4, 2, "CNOT")
    inp = make_input(2, 2, 1, rng)
    a = run_protocol(cs, inp, N=3, seed=7).to_dict()
    b = run_protocol(cs, inp, N=3, seed=7).to_dict()
    assert a == b
    c = run_protocol(cs, inp, N=3, seed=8).to_dict()
    assert a["ports"] != c["ports"] or a["final_key"] != c["final_key"]


def test_intra_layer_order_invariance(rng):
    cs = corpus.random_circuit(6, 2, 2, rng)
    inp = make_input(3, 3, 1, rng)
    base = run_protocol(cs, inp, N=2, seed=3)
    for order in ("reverse", 11):
        other = run_protocol(cs, inp, N=2, seed=3, layer_order=order)
        np.testing.assert_allclose(other.final_rho, base.final_rho, atol=1e-10)
        assert other.ports == base.ports


def test_port_relabelling_does_not_matter(rng):
    cs = corpus.brickwork(4, 2, "CZ")
    inp = make_input(2, 2, 1, rng)
    out = run_protocol(cs, inp, N=3, seed=2, port_permutation=[3, 1, 2])
    assert out.fidelity > 1 - 1e-9


def test_declared_resources_match_cost(rng):
    cs = corpus.brickwork(8, 2, "CNOT")
    out = run_protocol(cs, make_input(4, 4, 0, rng), N=4, seed=0)
    assert out.resources_declared == entanglement_cost(cs, 4).E + 4
    assert out.resources_materialized < out.resources_declared


def test_snooping_alice_is_caught(rng):
    class Snoop(Alice):
        def step3_apply(self, gate, label, port):
            self.read(BOB, "ports")
            super().step3_apply(gate, label, port)

    with pytest.raises(NoSignallingViolation):
        run_protocol(corpus.single_gate(2, [0], "H"), make_input(1, 1, 0, rng), 2, alice_cls=Snoop)


def test_ledger_rejects_early_messages():
    ledger = MessageLedger()
    with pytest.raises(NoSignallingViolation):
        ledger.send("alice", "bob", "keys", 3)


def test_gaps_and_structure_only_rejected(rng):
    gap = CircuitStructure.build(3, [[((0, 1), "CNOT")], [((1, 2), "CZ")], [((0, 1), "CNOT")]])
    with pytest.raises(CircuitError, match="pad_idle_qubits"):
        run_protocol(gap, make_input(1, 2, 0, rng), 2)
    with pytest.raises(CircuitError):
        run_protocol(corpus.brickwork(4, 1), make_input(2, 2, 0, rng), 2)


def test_full_mode_budget_guard(rng):
    with pytest.raises(RegisterBudgetError):
        run_protocol(corpus.brickwork(4, 2, "CNOT"), make_input(2, 2, 0, rng), 2, lazy=False)


@pytest.mark.parametrize("backend", ["ideal", "physical"])
def test_lazy_and_full_agree_per_seed(rng, backend):
    cs = corpus.single_gate(2, [0], "H")
    inp = make_input(1, 1, 1, rng)
    for seed in range(6):
        lazy = run_protocol(cs, inp, 2, backend=backend, seed=seed)
        full = run_protocol(cs, inp, 2, backend=backend, seed=seed, lazy=False)
        assert lazy.ports == full.ports and lazy.final_key == full.final_key
        assert lazy.fidelity == pytest.approx(full.fidelity, abs=1e-9)


def test_physical_within_budget(rng):
    cs = corpus.single_gate(2, [1], random_unitary(2, rng))
    N = 65
    for seed in range(4):
        out = run_protocol(cs, make_input(1, 1, 1, rng), N, backend="physical", seed=seed)
        assert out.budget == pytest.approx(error_budget(cs, N))
        assert 2 * out.trace_distance <= out.budget


def test_clifford_sandwich(rng):
    inner = CircuitStructure.build(4, [[((q,), "T") for q in range(4)]])
    ci = CliffordTableau.from_gates(4, [("H", [q]) for q in range(4)])
    cf = CliffordTableau.from_gates(4, [("CNOT", [0, 1]), ("CNOT", [1, 2]), ("S", [3])])
    spec = with_clifford_sandwich(ci, cf, inner)
    inp = make_input(2, 2, 1, rng)
    out = run_spec(spec, inp, 3, seed=5)
    want = cf.to_unitary() @ dense_unitary(inner) @ ci.to_unitary()
    assert fidelity(out.final_rho, direct_output(want, inp, 1)) > 1 - 1e-9
    assert spec.cost(3).E == entanglement_cost(inner, 3).E


def test_non_clifford_sandwich_rejected():
    from nlqc_lightcone.qsim import PauliString
    # X and Z both mapped to X: images anticommute wrongly
    bad = CliffordTableau([PauliString.from_label("XI"), PauliString.from_label("IX")],
                          [PauliString.from_label("XI"), PauliString.from_label("IZ")])
    assert not bad.is_symplectic()
    with pytest.raises(ValueError):
        with_clifford_sandwich(bad, None, corpus.single_gate(2, [0], "H"))


def test_local_prepost(rng):
    inner = corpus.depth_one(4, 2, "CNOT")
    wa, wb2 = random_unitary(4, rng), random_unitary(4, rng)
    spec = with_local_prepost(wa, None, None, wb2, inner)
    inp = make_input(2, 2, 1, rng)
    out = run_spec(spec, inp, 2, seed=1)
    want = np.kron(np.eye(4), wb2) @ dense_unitary(inner) @ np.kron(wa, np.eye(4))
    assert fidelity(out.final_rho, direct_output(want, inp, 1)) > 1 - 1e-9


def test_shift_fixture_with_ancillas(rng):
    spec = ProtocolSpec(corpus.cyclic_shift_with_ancillas(4), 2, 2, 2, 2)
    inp = make_input(2, 2, 1, rng)
    out = run_spec(spec, inp, 2, seed=1)
    assert fidelity(out.final_rho, direct_output(corpus.shift_unitary(4), inp, 1)) > 1 - 1e-9


def test_isometric_prepost(rng):
    # Alice encodes one qubit into two, the inner circuit acts, she decodes and drops the ancilla
    va = complete_isometry(random_unitary(4, rng)[:, :2])
    wa = va.conj().T
    inner = CircuitStructure.build(3, [[((0, 1), "CZ")], [((0, 1), "CZ"), ((2,), "H")]])
    spec = with_isometric_prepost(va, None, wa, None, inner, 1, 1)
    inp = make_input(1, 1, 1, rng)
    out = run_spec(spec, inp, 2, seed=3)
    # CZ twice is the identity, so the output is H on Bob's qubit
    want = np.kron(np.eye(2), named_unitary("H"))
    assert fidelity(out.final_rho, direct_output(want, inp, 1)) > 1 - 1e-9


def test_whole_register_reduction(rng):
    u = random_unitary(4, rng)
    inp = make_input(1, 1, 1, rng)
    for seed in range(3):
        a = run_whole_register(u, inp, 3, backend="physical", seed=seed)
        b = run_protocol(corpus.single_gate(2, (0, 1), u), inp, 3, backend="physical", seed=seed)
        assert a.to_dict() == b.to_dict()
    assert whole_register_required_ports(2, 2) == 16 * 2**8 // 4


def test_event_rng_is_keyed():
    a = event_rng(1, "pbt", GateId(1, 1)).random()
    assert a == event_rng(1, "pbt", GateId(1, 1)).random()
    assert a != event_rng(1, "pbt", GateId(1, 2)).random()
    assert a != event_rng(2, "pbt", GateId(1, 1)).random()


def test_resource_label_validation():
    cs = corpus.brickwork(4, 2)
    lab = ResourceLabel.make(GateId(2, 1), {GateId(1, 1): 1, GateId(1, 2): 2, GateId(2, 1): 3}, "B")
    lab.validate(cs, 3)
    with pytest.raises(ValueError):
        lab.validate(cs, 2)
