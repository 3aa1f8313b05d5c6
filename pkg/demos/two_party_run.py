"""One communication round, end to end.

Alice and Bob share entanglement and nothing else. Bob port-teleports each
gate's qubits to Alice, Alice applies the gate on every port while undoing
the keys she can look up, and after a single simultaneous exchange both can
strip the final Pauli. We check the result against applying the circuit
directly.
"""

import numpy as np

from nlqc_lightcone import corpus
from nlqc_lightcone.engine import ProtocolSpec, make_input, run_protocol, run_spec, with_clifford_sandwich
from nlqc_lightcone.qsim import CliffordTableau

rng = np.random.default_rng(5)

# exact port teleportation: the protocol is exact
cs = corpus.random_circuit(4, 3, 2, rng)
out = run_protocol(cs, make_input(2, 2, 1, rng), N=3, seed=1)
print(f"ideal backend, random depth-3 circuit: fidelity {out.fidelity:.12f}")
print(f"  ports seen by Bob {out.to_dict()['ports']}, final Pauli {out.final_key}")
print(f"  ledger {out.ledger.summary()}")
print(f"  declared Bell pairs {out.resources_declared}, blocks simulated {out.resources_materialized}\n")

# physical port teleportation: the error shrinks with N and stays inside the budget
h = corpus.single_gate(2, [1], "H")
for N in (4, 16, 64, 256):
    worst = max(run_protocol(h, make_input(1, 1, 1, rng), N, backend="physical", seed=s).trace_distance
                for s in range(5))
    budget = run_protocol(h, make_input(1, 1, 1, rng), N, backend="physical").budget
    print(f"physical backend N={N:>3}: worst trace distance {worst:.4f}, budget {budget:.3f}")
print()

# global Cliffords at both ends come for free
inner = corpus.brickwork(4, 2, "CZ")
spec = with_clifford_sandwich(CliffordTableau.random(4, rng), CliffordTableau.random(4, rng), inner)
out = run_spec(spec, make_input(2, 2, 1, rng), 2, seed=3)
print(f"Clifford sandwich: fidelity {out.fidelity:.12f}, cost {spec.cost(2).E} = inner cost")

# ancillas turn a depth-n shift into a depth-2 circuit
spec = ProtocolSpec(corpus.cyclic_shift_with_ancillas(4), 2, 2, 2, 2)
out = run_spec(spec, make_input(2, 2, 1, rng), 2, seed=4)
print(f"cyclic shift with ancillas: fidelity {out.fidelity:.12f}")
