from .channels import (
    ChoiMatrix,
    choi_from_kraus,
    choi_of,
    depolarizing_choi,
    diamond_bounds,
    identity_choi,
    kraus_from_choi,
    stinespring_isometry,
    unitary_choi,
)
from .pauli import CliffordTableau, PauliString, decompose_pauli, pauli_product
from .statevector import (
    DensityMatrix,
    StateVector,
    allocate,
    apply_pauli,
    apply_unitary,
    discard,
    entropy,
    is_unitary,
    measure,
    partial_trace,
    random_state,
    random_unitary,
    state_fidelity,
    trace_distance,
    trace_norm,
)


def clifford_conjugate(c: CliffordTableau, p: PauliString) -> PauliString:
    return c.conjugate(p)


__all__ = [
    "ChoiMatrix", "CliffordTableau", "DensityMatrix", "PauliString", "StateVector",
    "allocate", "apply_pauli", "apply_unitary", "choi_from_kraus", "choi_of", "clifford_conjugate",
    "decompose_pauli", "depolarizing_choi", "diamond_bounds", "discard", "entropy", "identity_choi",
    "is_unitary", "kraus_from_choi", "measure", "partial_trace", "pauli_product", "random_state",
    "random_unitary", "state_fidelity", "stinespring_isometry", "trace_distance", "trace_norm",
    "unitary_choi",
]
