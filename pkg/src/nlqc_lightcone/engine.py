"""Two-party execution of the light-cone protocol.

Alice and Bob are separate objects that only see their own classical
stores until the single communication round; every quantum operation is
checked against subsystem ownership. The engine itself plays the role of
the physical world: it decides which resource blocks need to exist in the
statevector (lazy mode materializes only the realized branch) but never
passes one party's secrets to the other.

Logical qubits ``0 .. nA-1`` start with Alice and ``nA .. n-1`` with Bob.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import sqrtm

from .circuit import CircuitError, CircuitStructure, GateId, ancestors, family, load_circuit, parents
from .costmodel import AccuracyTarget, whole_register_ports, entanglement_cost, error_budget, ports_required
from .qsim.channels import stinespring_isometry
from .qsim.pauli import CliffordTableau, PauliString
from .qsim.statevector import StateVector, is_unitary, random_state
from .teleport import (
    BellPair,
    PauliKey,
    PortBlock,
    PortIndex,
    key_from_uniform,
    normal_teleport,
    pbt_error_channel,
    pbt_ideal,
    pbt_physical,
    uniform_index,
)

ALICE, BOB, ENV, REF = "alice", "bob", "env", "ref"
PRE_ROUND, ROUND, POST_ROUND = "pre-round", "round", "post-round"
FULL_REGISTER_BUDGET = 24


class NoSignallingViolation(RuntimeError):
    """A party touched information or systems it could not have had before the round."""


class RegisterBudgetError(RuntimeError):
    pass


# randomness ---------------------------------------------------------------

def event_rng(seed: int, *key) -> np.random.Generator:
    """Independent generator for one named stochastic event.

    Keying by event rather than by call order makes lazy and full runs
    consume identical randomness for the events they share.
    """
    digest = hashlib.sha256(repr(key).encode()).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) % 2**63, *words])))


# labels and resources -------------------------------------------------------

@dataclass(frozen=True)
class ResourceLabel:
    """``(gate, x_fm, m)``: ``x_fm`` maps every family member to a port in ``[1, N]``."""

    gate: GateId
    x_fm: tuple[tuple[GateId, int], ...]
    m: str

    def __post_init__(self):
        if self.m not in ("A", "B"):
            raise ValueError("side tag must be 'A' or 'B'")

    @classmethod
    def make(cls, gate: GateId, x_fm: dict, m: str) -> "ResourceLabel":
        return cls(GateId(*gate), tuple(sorted((GateId(*g), int(v)) for g, v in x_fm.items())), m)

    @property
    def mapping(self) -> dict[GateId, int]:
        return dict(self.x_fm)

    def restrict(self, gate: GateId, members, m: Optional[str] = None) -> "ResourceLabel":
        mp = self.mapping
        return ResourceLabel.make(gate, {g: mp[g] for g in members}, m or self.m)

    def validate(self, cs: CircuitStructure, N: int) -> None:
        if set(self.mapping) != set(family(cs, self.gate)):
            raise ValueError("label keys differ from the gate's family")
        if any(not 1 <= v <= N for v in self.mapping.values()):
            raise ValueError("label value outside [1, N]")

    def __str__(self) -> str:
        xs = ",".join(f"{g.layer}.{g.index}={v}" for g, v in self.x_fm)
        return f"{self.gate}[{xs}]{self.m}"


@dataclass
class ResourceInventory:
    """Declared resources per the setup rule and the subset actually instantiated."""

    N: int
    per_gate: dict[GateId, tuple[int, int, int]]  # gate -> (k, |fm|, systems = 2 N^|fm|)
    initial_pairs: int
    lazy: bool
    materialized: set = field(default_factory=set)

    @property
    def declared_bell_pairs(self) -> int:
        return sum(k * systems for k, _, systems in self.per_gate.values())

    @property
    def declared_systems(self) -> int:
        return sum(s for _, _, s in self.per_gate.values())

    def materialize(self, gate: GateId, kind: str, label) -> None:
        self.materialized.add((gate, kind, label))

    def materialized_per_gate(self) -> dict[GateId, int]:
        out = {g: 0 for g in self.per_gate}
        for g, _, _ in self.materialized:
            out[g] += 1
        return out

    def summary(self) -> dict:
        return {
            "N": self.N,
            "declared_bell_pairs": self.declared_bell_pairs,
            "initial_pairs": self.initial_pairs,
            "materialized_blocks": len(self.materialized),
            "lazy": self.lazy,
        }


def full_register_qubits(cs: CircuitStructure, N: int, n_alice: int) -> int:
    """Qubits a fully materialized run allocates (pairs, input excluded)."""
    total = 2 * n_alice  # initial teleportation pairs
    for g in cs.gates():
        anc = len(ancestors(cs, g.id))
        total += 2 * g.k * N * N**anc      # PBT blocks
        total += 2 * g.k * N ** (anc + 1)  # return pairs
    return total


def allocate_resources(cs: CircuitStructure, N: int, lazy: bool = True, n_alice: Optional[int] = None,
                       budget: int = FULL_REGISTER_BUDGET, input_qubits: int = 0) -> ResourceInventory:
    if N < 1:
        raise ValueError("N must be at least 1")
    n_alice = cs.n // 2 if n_alice is None else n_alice
    per_gate = {g.id: (g.k, len(family(cs, g.id)), 2 * N ** len(family(cs, g.id))) for g in cs.gates()}
    inv = ResourceInventory(N, per_gate, n_alice, lazy)
    if not lazy:
        need = full_register_qubits(cs, N, n_alice) + input_qubits
        if need > budget:
            raise RegisterBudgetError(f"full materialization needs {need} qubits, budget is {budget}")
    return inv


# classical discipline -----------------------------------------------------------

@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    kind: str
    step: int
    phase: str
    size: int


class MessageLedger:
    """Log of everything that crosses between the parties."""

    def __init__(self):
        self.phase = PRE_ROUND
        self.entries: list[Message] = []
        self.rounds = 0

    def open_round(self) -> None:
        if self.phase != PRE_ROUND:
            raise NoSignallingViolation("communication round opened twice")
        self.phase = ROUND
        self.rounds += 1

    def close_round(self) -> None:
        if self.phase != ROUND:
            raise NoSignallingViolation("round closed without being opened")
        self.phase = POST_ROUND

    def send(self, sender: str, receiver: str, kind: str, step: int, size: int = 1) -> None:
        if self.phase != ROUND:
            raise NoSignallingViolation(f"{sender} -> {receiver} {kind} outside the communication round")
        self.entries.append(Message(sender, receiver, kind, step, self.phase, size))

    @property
    def pre_round_count(self) -> int:
        return sum(1 for m in self.entries if m.phase == PRE_ROUND)

    def validate(self) -> None:
        if self.pre_round_count:
            raise NoSignallingViolation("pre-round cross-party messages present")
        if self.rounds != 1 or any(m.phase != ROUND for m in self.entries):
            raise NoSignallingViolation("expected exactly one simultaneous exchange")
        directions = {(m.sender, m.receiver) for m in self.entries}
        if not directions <= {(ALICE, BOB), (BOB, ALICE)}:
            raise NoSignallingViolation("unexpected message direction")

    def summary(self) -> dict:
        return {
            "pre_round": self.pre_round_count,
            "rounds": self.rounds,
            "messages": [f"{m.sender}->{m.receiver}:{m.kind}({m.size})" for m in self.entries],
        }


_MISSING = object()


class PrivateStore:
    """Classical memory of one party; other parties may read only what was sent in the round."""

    def __init__(self, owner: str, ledger: MessageLedger):
        self.owner = owner
        self.ledger = ledger
        self._data: dict = {}
        self._released: dict[str, set] = {}

    def write(self, writer: str, key, value) -> None:
        if writer != self.owner:
            raise NoSignallingViolation(f"{writer} wrote into {self.owner}'s memory")
        self._data[key] = value

    def _check(self, reader: str, key) -> None:
        if reader == self.owner:
            return
        if key not in self._released.get(reader, set()):
            raise NoSignallingViolation(
                f"{reader} read {self.owner}'s {key!r} during phase {self.ledger.phase}")

    def read(self, reader: str, key, default=_MISSING):
        self._check(reader, key)
        if key in self._data:
            return self._data[key]
        if default is _MISSING:
            raise KeyError(key)
        return default

    def release(self, receiver: str, key, step: int = 6) -> None:
        """Send entry ``key`` to ``receiver`` through the ledger."""
        value = self._data.get(key)
        size = len(value) if hasattr(value, "__len__") else 1
        self.ledger.send(self.owner, receiver, str(key), step, size)
        self._released.setdefault(receiver, set()).add(key)


class KeyStore:
    """Alice's lookup functions ``P_{i,j}(x_fm)`` and initial key; Bob's realized ports."""

    def __init__(self, ledger: MessageLedger, seed: int):
        self.alice = PrivateStore(ALICE, ledger)
        self.bob = PrivateStore(BOB, ledger)
        self.alice.write(ALICE, "keys", {})
        self.bob.write(BOB, "ports", {})
        self.seed = seed

    def alice_key(self, reader: str, label: ResourceLabel, k: int) -> PauliKey:
        """Key for ``label``; unmaterialized labels get the uniform key their Bell measurement would give."""
        keys = self.alice.read(reader, "keys")
        if label not in keys:
            if reader != ALICE:
                raise KeyError(label)
            u = event_rng(self.seed, "return", label).random()
            keys[label] = PauliKey(key_from_uniform(u, k), label)
        return keys[label]


# quantum world ---------------------------------------------------------------

class QuantumWorld:
    """Statevector with an owner for each subsystem."""

    def __init__(self, sv: StateVector):
        self.sv = sv
        self.owner: dict[str, str] = {}

    def own(self, name: str, party: str) -> None:
        self.owner[name] = party

    def check(self, party: str, targets) -> None:
        names = set()
        for t in (targets if isinstance(targets, list) else [targets]):
            names.add(t if isinstance(t, str) else t[0])
        for nm in names:
            if self.owner.get(nm) != party:
                raise NoSignallingViolation(f"{party} acted on {nm!r} owned by {self.owner.get(nm)}")

    def apply_unitary(self, party: str, u: np.ndarray, targets) -> None:
        self.check(party, targets)
        self.sv.apply_unitary(u, targets, check=False)

    def apply_pauli(self, party: str, p: PauliString, targets) -> None:
        self.check(party, targets)
        self.sv.apply_pauli(p, targets)

    def pair(self, left: str, left_owner: str, right: str, right_owner: str, k: int) -> None:
        self.sv.allocate((left, right), 2 * k, "bell")
        self.own(left, left_owner)
        self.own(right, right_owner)

    def transfer(self, name: str, to: str) -> None:
        self.owner[name] = to

    def discard(self, party: str, name: str) -> None:
        """Hand a subsystem to the environment, dropping it when it is unentangled."""
        self.check(party, name)
        if self.sv.is_product(name):
            self.sv.remove(name)
            self.owner.pop(name, None)
        else:
            self.owner[name] = ENV


# protocol description ----------------------------------------------------------

@dataclass
class ProtocolSpec:
    """Inner circuit plus the local and Clifford wrappers around it.

    Alice's inner register is her ``n_alice`` inputs followed by ``anc_alice``
    ancillas; Bob's likewise. ``pre_*``/``post_*`` are unitaries on a party's
    whole inner register; after ``post_*`` the ancillas are discarded.
    """

    inner: CircuitStructure
    n_alice: int
    n_bob: int
    anc_alice: int = 0
    anc_bob: int = 0
    pre_alice: Optional[np.ndarray] = None
    pre_bob: Optional[np.ndarray] = None
    post_alice: Optional[np.ndarray] = None
    post_bob: Optional[np.ndarray] = None
    clifford_initial: Optional[CliffordTableau] = None
    clifford_final: Optional[CliffordTableau] = None

    def __post_init__(self):
        if self.inner.n != self.width_alice + self.width_bob:
            raise ValueError(f"inner circuit has {self.inner.n} qubits, parties hold "
                             f"{self.width_alice}+{self.width_bob}")
        for name, mat, width in (("pre_alice", self.pre_alice, self.width_alice),
                                 ("post_alice", self.post_alice, self.width_alice),
                                 ("pre_bob", self.pre_bob, self.width_bob),
                                 ("post_bob", self.post_bob, self.width_bob)):
            if mat is not None:
                if np.shape(mat) != (2**width, 2**width):
                    raise ValueError(f"{name} has shape {np.shape(mat)}, expected {2**width} square")
                if not is_unitary(mat):
                    raise ValueError(f"{name} is not unitary")
        for name, c in (("clifford_initial", self.clifford_initial), ("clifford_final", self.clifford_final)):
            if c is not None and c.num_qubits != self.inner.n:
                raise ValueError(f"{name} acts on {c.num_qubits} qubits, expected {self.inner.n}")

    @property
    def width_alice(self) -> int:
        return self.n_alice + self.anc_alice

    @property
    def width_bob(self) -> int:
        return self.n_bob + self.anc_bob

    @classmethod
    def plain(cls, cs: CircuitStructure, n_alice: Optional[int] = None) -> "ProtocolSpec":
        n_alice = cs.n // 2 if n_alice is None else n_alice
        return cls(cs, n_alice, cs.n - n_alice)

    def cost(self, N: int):
        return entanglement_cost(self.inner, N)


def with_local_prepost(WA, WB, WA2, WB2, inner: CircuitStructure,
                       n_alice: Optional[int] = None) -> ProtocolSpec:
    """Local unitaries before step 1 and after step 7; cost is the inner structure's."""
    base = ProtocolSpec.plain(inner, n_alice)
    return ProtocolSpec(inner, base.n_alice, base.n_bob, pre_alice=_opt(WA), pre_bob=_opt(WB),
                        post_alice=_opt(WA2), post_bob=_opt(WB2))


def with_clifford_sandwich(Ci: Optional[CliffordTableau], Cf: Optional[CliffordTableau],
                           inner: CircuitStructure, n_alice: Optional[int] = None) -> ProtocolSpec:
    """Implements ``C_f U' C_i`` at the cost of ``U'``."""
    for c in (Ci, Cf):
        if c is not None and not c.is_symplectic():
            raise ValueError("not a Clifford tableau")
    base = ProtocolSpec.plain(inner, n_alice)
    return ProtocolSpec(inner, base.n_alice, base.n_bob, clifford_initial=Ci, clifford_final=Cf)


def complete_isometry(v: np.ndarray) -> np.ndarray:
    """Unitary ``U`` with ``U (|psi> (x) |0..0>) = V |psi>``."""
    v = np.asarray(v, dtype=complex)
    out, inp = v.shape
    if out == inp:
        return v
    if out % inp or not np.allclose(v.conj().T @ v, np.eye(inp), atol=1e-9):
        raise ValueError("not an isometry between qubit registers")
    anc = out // inp
    u = np.zeros((out, out), dtype=complex)
    u[:, ::anc] = v
    # fill the remaining columns with an orthonormal complement
    proj = np.eye(out) - v @ v.conj().T
    w, vecs = np.linalg.eigh(proj)
    comp = vecs[:, w > 0.5]
    free = [c for c in range(out) if c % anc]
    u[:, free] = comp
    return u


def with_isometric_prepost(VA, VB, WA, WB, inner: CircuitStructure, n_alice: int, n_bob: int) -> ProtocolSpec:
    """Isometries in (as ancilla-append then unitary) and channels out (unitary then discard).

    ``VA`` maps Alice's ``n_alice`` qubits to her inner register (it may be
    given as a rectangular isometry or as the completed unitary); ``WA`` is
    a unitary on her inner register after which the ancillas are discarded.
    """
    width_alice = inner.n // 2 if VA is None else int(round(math.log2(np.shape(VA)[0])))
    width_bob = inner.n - width_alice
    if width_alice < n_alice or width_bob < n_bob:
        raise ValueError("isometries cannot shrink the registers")
    return ProtocolSpec(inner, n_alice, n_bob, width_alice - n_alice, width_bob - n_bob,
                        pre_alice=None if VA is None else complete_isometry(VA),
                        pre_bob=None if VB is None else complete_isometry(VB),
                        post_alice=_opt(WA), post_bob=_opt(WB))


def _opt(m):
    return None if m is None else np.asarray(m, dtype=complex)


# parties -------------------------------------------------------------------------

class Party:
    def __init__(self, name: str, world: QuantumWorld, keys: KeyStore, spec: ProtocolSpec, N: int, seed: int):
        self.name = name
        self.world = world
        self.keys = keys
        self.spec = spec
        self.cs = spec.inner
        self.N = N
        self.seed = seed

    def read(self, owner: str, key):
        store = self.keys.alice if owner == ALICE else self.keys.bob
        return store.read(self.name, key)

    def rng(self, *key) -> np.random.Generator:
        return event_rng(self.seed, *key)


def _restricted_key(key: PauliString, support: Sequence[int], qubits: Sequence[int]) -> PauliString:
    pos = [list(support).index(q) for q in qubits]
    return key.restrict(pos)


class Alice(Party):
    """Alice's steps 1, 3, 4 and her half of 7."""

    def step1_teleport(self, source: list, pair: BellPair) -> None:
        if not source:
            key = PauliString.identity(0)
        else:
            key, _ = normal_teleport(self.world.sv, source, pair, self.rng("init"))
            key = key.key
        p = key.tensor(PauliString.identity(self.spec.width_bob))
        if self.spec.clifford_initial is not None:
            p = self.spec.clifford_initial.conjugate(p)
        self.keys.alice.write(ALICE, "initial", PauliKey(p, "initial"))

    def qubit_key(self, q: int, layer: int, label: ResourceLabel) -> PauliString:
        """Current key of logical qubit ``q`` entering ``layer``, read on the branch ``label``."""
        prev = self.cs.last_toucher(q, layer)
        if prev is None:
            return self.read(ALICE, "initial").key.restrict([q])
        if prev.layer != layer - 1:
            raise CircuitError(f"qubit {q} idles before layer {layer}; pad the circuit first")
        pg = self.cs.gate(prev)
        parent_label = label.restrict(prev, family(self.cs, prev), "A")
        key = self.keys.alice_key(ALICE, parent_label, pg.k).key
        return _restricted_key(key, pg.support, [q])

    def step3_apply(self, gate: GateId, label: ResourceLabel, port: str) -> None:
        g = self.cs.gate(gate)
        decrypt = PauliString.identity(0)
        for q in g.support:
            decrypt = decrypt.tensor(self.qubit_key(q, gate.layer, label))
        self.world.apply_pauli(ALICE, decrypt.dagger(), port)
        self.world.apply_unitary(ALICE, g.matrix(), port)

    def step4_return(self, gate: GateId, label: ResourceLabel, port: str, pair: BellPair) -> None:
        self.world.check(ALICE, [port, pair.sender])
        ret = ResourceLabel(label.gate, label.x_fm, "A")
        key, _ = normal_teleport(self.world.sv, port, pair, self.rng("return", ret), context=ret)
        self.keys.alice.read(ALICE, "keys")[ret] = key
        self.world.owner.pop(port, None)
        self.world.owner.pop(pair.sender, None)

    def round_send(self) -> None:
        self.keys.alice.release(BOB, "initial")
        self.keys.alice.release(BOB, "keys")


class Bob(Party):
    """Bob's steps 2 and 5, the pre-round Clifford, and his half of 7."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.location: dict[int, tuple[str, int]] = {}

    def realized(self, gate: GateId, members) -> dict[GateId, int]:
        ports = self.keys.bob.read(BOB, "ports")
        return {g: ports[g].value for g in members if g != gate}

    def record_port(self, gate: GateId, x: int) -> None:
        self.keys.bob.read(BOB, "ports")[gate] = PortIndex(x, self.N)

    def support_qubits(self, gate: GateId) -> list:
        return [self.location[q] for q in self.cs.gate(gate).support]

    def apply_logical(self, u: np.ndarray, qubits: Sequence[int]) -> None:
        self.world.apply_unitary(BOB, u, [self.location[q] for q in qubits])

    def round_send(self) -> None:
        self.keys.bob.release(ALICE, "ports")


# outcome ------------------------------------------------------------------------------

@dataclass
class ProtocolOutcome:
    final_state: StateVector
    final_rho: np.ndarray
    oracle_state: np.ndarray
    fidelity: float
    trace_distance: float
    ledger: MessageLedger
    seed: int
    resources_declared: int
    resources_materialized: int
    ports: dict
    backend: str
    N: int
    budget: Optional[float] = None
    inventory: Optional[ResourceInventory] = None
    final_key: str = ""

    def to_dict(self) -> dict:
        return {
            "fidelity": round(self.fidelity, 12),
            "trace_distance": round(self.trace_distance, 12),
            "error_budget": self.budget,
            "backend": self.backend,
            "N": self.N,
            "seed": self.seed,
            "ports": {f"{g.layer},{g.index}": p for g, p in sorted(self.ports.items())},
            "final_key": self.final_key,
            "resources_declared": self.resources_declared,
            "resources_materialized": self.resources_materialized,
            "ledger": self.ledger.summary(),
        }


def density_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``."""
    w, v = np.linalg.eigh(sigma)
    if w[-1] > 1 - 1e-12:
        psi = v[:, -1]
        return float(np.real(psi.conj() @ rho @ psi))
    s = sqrtm(rho)
    return float(np.real(np.trace(sqrtm(s @ sigma @ s))) ** 2)


# engine -------------------------------------------------------------------------------

class _Run:
    def __init__(self, spec: ProtocolSpec, input_state: StateVector, N: int, backend: str, seed: int,
                 lazy: bool, port_permutation, layer_order, alice_cls, bob_cls, channel_method):
        if backend not in ("ideal", "physical"):
            raise ValueError("backend must be 'ideal' or 'physical'")
        if spec.inner.is_structure_only():
            raise CircuitError("simulation needs gate unitaries")
        if spec.inner.gaps():
            raise CircuitError("circuit has idle gaps between layers; use pad_idle_qubits")
        self.spec, self.cs, self.N = spec, spec.inner, N
        self.backend, self.seed, self.lazy = backend, int(seed), lazy
        self.perm = list(port_permutation) if port_permutation is not None else list(range(1, N + 1))
        if sorted(self.perm) != list(range(1, N + 1)):
            raise ValueError("port_permutation must permute 1..N")
        self.layer_order = layer_order
        self.channel_method = channel_method
        self.input = input_state
        self._check_input()
        self.inventory = allocate_resources(self.cs, N, lazy, spec.width_alice,
                                            input_qubits=input_state.num_qubits + spec.anc_alice + spec.anc_bob)
        self.ledger = MessageLedger()
        self.keys = KeyStore(self.ledger, self.seed)
        self.world = QuantumWorld(input_state.copy())
        for nm in self.world.sv.names():
            self.world.own(nm, {"A": ALICE, "B": BOB}.get(nm, REF))
        self.alice = alice_cls(ALICE, self.world, self.keys, spec, N, self.seed)
        self.bob = bob_cls(BOB, self.world, self.keys, spec, N, self.seed)

    def _check_input(self) -> None:
        sv = self.input
        for nm, want in (("A", self.spec.n_alice), ("B", self.spec.n_bob)):
            have = sv.size(nm) if nm in sv else 0
            if have != want:
                raise ValueError(f"input subsystem {nm} has {have} qubits, expected {want}")
        for nm in sv.names():
            if nm not in ("A", "B", "R"):
                raise ValueError(f"unexpected input subsystem {nm!r}; use A, B and R")

    # names ------------------------------------------------------------------
    @staticmethod
    def port_name(label: ResourceLabel) -> str:
        return f"A:pbt{label}"

    @staticmethod
    def ret_names(label: ResourceLabel) -> tuple[str, str]:
        return f"A:ret{label}", f"B:ret{label}"

    def labels(self, gate: GateId) -> list[ResourceLabel]:
        fm = sorted(family(self.cs, gate))
        return [ResourceLabel.make(gate, dict(zip(fm, xs)), "B")
                for xs in itertools.product(range(1, self.N + 1), repeat=len(fm))]

    # steps --------------------------------------------------------------------
    def local_pre(self) -> None:
        sv, spec = self.world.sv, self.spec
        for party, nm, anc, pre in ((ALICE, "A", spec.anc_alice, spec.pre_alice),
                                    (BOB, "B", spec.anc_bob, spec.pre_bob)):
            regs = ([nm] if nm in sv else [])
            if anc:
                sv.allocate(nm + ".anc", anc)
                self.world.own(nm + ".anc", party)
                regs.append(nm + ".anc")
            if pre is not None:
                self.world.apply_unitary(party, pre, regs)
            qubits = [q for r in regs for q in sv.qubits(r)]
            if party == ALICE:
                self.alice_qubits = qubits
            else:
                self.bob_qubits = qubits

    def step1(self) -> None:
        na = self.spec.width_alice
        pair = BellPair("A:init", "B:init")
        if na:
            self.world.pair(pair.sender, ALICE, pair.receiver, BOB, na)
            self.world.check(ALICE, list(self.alice_qubits))
        self.alice.step1_teleport(list(self.alice_qubits), pair)
        # one subsystem per logical qubit, so later regroups never renumber Bob's holdings
        held = [(pair.receiver, q) for q in range(na)] + list(self.bob_qubits)
        for q in reversed(range(len(held))):
            self._split(held[q], f"B:q{q}", q)
        if self.spec.clifford_initial is not None:
            self.bob.apply_logical(self.spec.clifford_initial.to_unitary(), range(self.cs.n))

    def layer_gates(self, layer) -> list:
        gates = list(layer)
        if self.layer_order == "reverse":
            gates.reverse()
        elif isinstance(self.layer_order, int):
            rng = np.random.default_rng(self.layer_order)
            gates = [gates[i] for i in rng.permutation(len(gates))]
        return gates

    def run_gate(self, gate: GateId) -> None:
        g = self.cs.gate(gate)
        k = g.k
        fm = family(self.cs, gate)
        anc = {h: v for h, v in self.bob.realized(gate, fm).items()}
        u = event_rng(self.seed, "pbt", gate).random()
        source = self.bob.support_qubits(gate)
        self.world.check(BOB, source)

        if self.lazy:
            x_phys = uniform_index(u, self.N) + 1
            x = self.perm[x_phys - 1]
            realized = ResourceLabel.make(gate, {**anc, gate: x}, "B")
            self.inventory.materialize(gate, "pbt", tuple(sorted(anc.items())))
            port = self.port_name(realized)
            if self.backend == "ideal":
                self.world.sv.regroup(source, port)
            else:
                choi = pbt_error_channel(k, self.N, self.channel_method)
                v = stinespring_isometry(choi, 2 * k)
                self.world.sv.apply_isometry(v, source, [(port, k), (f"env:{realized}", 2 * k)])
                self.world.own(f"env:{realized}", ENV)
            self.world.own(port, ALICE)
            self.bob.record_port(gate, x)
            materialized = [realized]
        else:
            blocks = {}
            for label in self.labels(gate):
                key = tuple((h, v) for h, v in label.x_fm if h != gate)
                blocks.setdefault(key, []).append(label)
            # resources were pre-shared at setup; instantiate all of them
            for key, labels in blocks.items():
                by_port = {lb.mapping[gate]: lb for lb in labels}
                senders = [f"B:pbt{gate}{key}#{xp}" for xp in range(1, self.N + 1)]
                receivers = [self.port_name(by_port[self.perm[xp - 1]]) for xp in range(1, self.N + 1)]
                for s, r in zip(senders, receivers):
                    self.world.pair(s, BOB, r, ALICE, k)
                blocks[key] = PortBlock(f"pbt{gate}{key}", self.N, k, tuple(senders), tuple(receivers))
                self.inventory.materialize(gate, "pbt", key)
            block = blocks[tuple(sorted(anc.items()))]
            self.world.check(BOB, list(block.senders))
            if self.backend == "ideal":
                idx, _ = pbt_ideal(self.world.sv, source, block, None, u=u)
                self.world.owner.pop(block.sender_half(idx.value), None)
                # the consumed pair's receiver name now holds the teleported qubits
            else:
                env = f"env:pbt{gate}"
                idx, _ = pbt_physical(self.world.sv, source, block, None, u=u, env_name=env)
                self.world.own(env, ENV)
                for s in block.senders:
                    self.world.owner.pop(s, None)
            x = self.perm[idx.value - 1]
            self.bob.record_port(gate, x)
            realized = ResourceLabel.make(gate, {**anc, gate: x}, "B")
            materialized = self.labels(gate)

        # step 3 and 4: Alice on every materialized port label
        for label in materialized:
            self.alice.step3_apply(gate, label, self.port_name(label))
        for label in materialized:
            a_name, b_name = self.ret_names(label)
            self.world.pair(a_name, ALICE, b_name, BOB, k)
            self.inventory.materialize(gate, "ret", label.x_fm)
            self.alice.step4_return(gate, label, self.port_name(label), BellPair(a_name, b_name))

        # step 5: Bob keeps the realized return and discards the others
        keep = self.ret_names(realized)[1]
        for label in materialized:
            b_name = self.ret_names(label)[1]
            if b_name != keep:
                self.world.discard(BOB, b_name)
        for i in reversed(range(k)):
            self._split((keep, i), f"B:q{g.support[i]}@{gate}", g.support[i])

    def _split(self, qubit, name: str, logical: int) -> None:
        self.world.check(BOB, [qubit])
        self.world.sv.regroup([qubit], name)
        self.world.own(name, BOB)
        self.bob.location[logical] = (name, 0)

    def round(self) -> None:
        if self.spec.clifford_final is not None:
            self.bob.apply_logical(self.spec.clifford_final.to_unitary(), range(self.cs.n))
        self.ledger.open_round()
        # quantum payload: Alice's logical qubits go back to her
        na = self.spec.width_alice
        moved = [self.bob.location[q] for q in range(na)]
        if moved:
            self.world.check(BOB, moved)
            self.world.sv.regroup(moved, "A:final")
            self.world.own("A:final", ALICE)
            self.ledger.send(BOB, ALICE, "qubits", 6, len(moved))
        rest = [self.bob.location[q] for q in range(na, self.cs.n)]
        if rest:
            self.world.sv.regroup(rest, "B:final")
            self.world.own("B:final", BOB)
        self.bob.round_send()
        self.alice.round_send()
        self.ledger.close_round()

    def final_pauli(self, reader: Party) -> PauliString:
        ports = reader.read(BOB, "ports")
        initial = reader.read(ALICE, "initial").key
        keys = reader.read(ALICE, "keys")
        out = PauliString.identity(0)
        for q in range(self.cs.n):
            last = self.cs.last_toucher(q, self.cs.depth + 1)
            if last is None:
                piece = initial.restrict([q])
            else:
                members = family(self.cs, last)
                label = ResourceLabel.make(last, {h: ports[h].value for h in members}, "A")
                pg = self.cs.gate(last)
                piece = _restricted_key(keys[label].key, pg.support, [q])
            out = out.tensor(piece)
        if self.spec.clifford_final is not None:
            out = self.spec.clifford_final.conjugate(out)
        return out

    def step7(self) -> None:
        pa = self.final_pauli(self.alice)
        pb = self.final_pauli(self.bob)
        if pa.without_phase() != pb.without_phase():
            raise RuntimeError("Alice's and Bob's reconstructions of the final Pauli differ")
        self.final_key = pa.without_phase().label()
        na = self.spec.width_alice
        if na:
            self.world.apply_pauli(ALICE, pa.restrict(range(na)).dagger(), "A:final")
        if self.cs.n - na:
            self.world.apply_pauli(BOB, pb.restrict(range(na, self.cs.n)).dagger(), "B:final")

    def local_post(self) -> None:
        spec, sv = self.spec, self.world.sv
        for party, reg, post, n_keep, anc, out in (
                (ALICE, "A:final", spec.post_alice, spec.n_alice, spec.anc_alice, "A"),
                (BOB, "B:final", spec.post_bob, spec.n_bob, spec.anc_bob, "B")):
            if reg not in sv:
                continue
            if post is not None:
                self.world.apply_unitary(party, post, reg)
            qubits = sv.qubits(reg)
            if anc:
                sv.regroup(qubits[n_keep:], reg + ".anc")
                self.world.own(reg + ".anc", party)
                self.world.discard(party, reg + ".anc")
            if reg in sv:
                sv.regroup(sv.qubits(reg), out + ":out")

    def execute(self) -> ProtocolOutcome:
        self.local_pre()
        self.step1()
        for layer in self.cs.layers:
            for g in self.layer_gates(layer):
                self.run_gate(g.id)
        self.round()
        self.step7()
        self.local_post()
        self.ledger.validate()
        return self.outcome()

    def outcome(self) -> ProtocolOutcome:
        sv = self.world.sv
        order = [nm for nm in ("A:out", "B:out") if nm in sv] + (["R"] if "R" in sv else [])
        rho = sv.density_matrix(order)
        oracle = oracle_density(self.spec, self.input)
        fid = density_fidelity(rho, oracle)
        td = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - oracle))))
        ports = {g: p.value for g, p in self.keys.bob.read(BOB, "ports").items()}
        return ProtocolOutcome(
            final_state=sv, final_rho=rho, oracle_state=oracle, fidelity=min(1.0, fid), trace_distance=td,
            ledger=self.ledger, seed=self.seed,
            resources_declared=self.inventory.declared_bell_pairs + self.inventory.initial_pairs,
            resources_materialized=len(self.inventory.materialized), ports=ports,
            backend=self.backend, N=self.N,
            budget=error_budget(self.cs, self.N) if self.backend == "physical" else None,
            inventory=self.inventory, final_key=self.final_key)


def oracle_density(spec: ProtocolSpec, input_state: StateVector) -> np.ndarray:
    """Direct application of the wrapped unitary; returns the output density on (A, B, R)."""
    sv = input_state.copy()
    regs = {}
    for nm, anc, pre in (("A", spec.anc_alice, spec.pre_alice), ("B", spec.anc_bob, spec.pre_bob)):
        names = [nm] if nm in sv else []
        if anc:
            sv.allocate(nm + ".anc", anc)
            names.append(nm + ".anc")
        if pre is not None:
            sv.apply_unitary(pre, names)
        regs[nm] = [q for r in names for q in sv.qubits(r)]
    logical = regs["A"] + regs["B"]
    if spec.clifford_initial is not None:
        sv.apply_unitary(spec.clifford_initial.to_unitary(), logical, check=False)
    spec.inner.apply_to(sv, logical)
    if spec.clifford_final is not None:
        sv.apply_unitary(spec.clifford_final.to_unitary(), logical, check=False)
    keep = []
    for nm, post, n_keep in (("A", spec.post_alice, spec.n_alice), ("B", spec.post_bob, spec.n_bob)):
        if post is not None:
            sv.apply_unitary(post, regs[nm])
        keep += regs[nm][:n_keep]
    if "R" in sv:
        keep += sv.qubits("R")
    return sv.density_matrix(keep)


def run_spec(spec: ProtocolSpec, input_state: StateVector, N: int, backend: str = "ideal", seed: int = 0,
             lazy: bool = True, port_permutation: Optional[Sequence[int]] = None, layer_order="forward",
             alice_cls=Alice, bob_cls=Bob, channel_method: str = "auto") -> ProtocolOutcome:
    run = _Run(spec, input_state, N, backend, seed, lazy, port_permutation, layer_order,
               alice_cls, bob_cls, channel_method)
    return run.execute()


def run_protocol(cs: CircuitStructure, input_state: StateVector, N: int, backend: str = "ideal",
                 seed: int = 0, **kwargs) -> ProtocolOutcome:
    """Run the protocol for ``cs`` on ``input_state`` (subsystems ``A``, ``B`` and optional ``R``)."""
    n_alice = input_state.size("A") if "A" in input_state else 0
    return run_spec(ProtocolSpec.plain(cs, n_alice), input_state, N, backend, seed, **kwargs)


def whole_register_structure(U: np.ndarray) -> CircuitStructure:
    n = int(round(math.log2(np.shape(U)[0])))
    return CircuitStructure.build(n, [[(tuple(range(n)), np.asarray(U, dtype=complex))]])


def run_whole_register(U: np.ndarray, input_state: StateVector, N: int, backend: str = "ideal",
                     seed: int = 0, **kwargs) -> ProtocolOutcome:
    """Single-gate protocol: one port teleportation of all ``n`` qubits and ``U`` on every port."""
    return run_protocol(whole_register_structure(U), input_state, N, backend, seed, **kwargs)


def whole_register_required_ports(n: int, epsilon: float):
    return whole_register_ports(n, AccuracyTarget(epsilon))


# inputs and configuration ------------------------------------------------------------

def make_input(n_alice: int, n_bob: int, n_ref: int, rng: np.random.Generator, kind: str = "random") -> StateVector:
    """Input state on A, B and reference R: random global, random product, or all zero."""
    m = n_alice + n_bob + n_ref
    if kind == "random":
        amps = random_state(m, rng)
    elif kind == "product":
        amps = np.ones(1, dtype=complex)
        for _ in range(m):
            amps = np.kron(amps, random_state(1, rng))
    elif kind == "zero":
        amps = np.zeros(2**m, dtype=complex)
        amps[0] = 1
    else:
        raise ValueError(f"unknown input kind {kind!r}")
    layout = [(nm, c) for nm, c in (("A", n_alice), ("B", n_bob), ("R", n_ref)) if c]
    return StateVector.from_amplitudes(amps, layout)


def _gate_list_unitary(width: int, gates) -> np.ndarray:
    layers = [[(tuple(q), name)] for name, q in gates]
    return CircuitStructure.build(width, layers).unitary() if layers else np.eye(2**width)


def spec_from_config(cfg: dict, base_dir: Path = Path(".")) -> tuple[ProtocolSpec, int]:
    """Build the protocol spec and port count from a JSON run configuration.

    Keys: ``circuit`` (path), ``N`` or ``epsilon``, optional ``n_alice``,
    ``ancillas`` ``[a, b]`` and ``extensions`` with ``pre_alice`` ...
    ``post_bob`` / ``clifford_initial`` / ``clifford_final`` as lists of
    ``[gate_name, [qubits]]``.
    """
    cs = load_circuit(base_dir / cfg["circuit"])
    if ("N" in cfg) == ("epsilon" in cfg):
        raise ValueError("config needs exactly one of N and epsilon")
    N = int(cfg["N"]) if "N" in cfg else ports_required(cs, float(cfg["epsilon"]))
    anc_a, anc_b = cfg.get("ancillas", [0, 0])
    width_a = cs.n // 2 if "n_alice" not in cfg else int(cfg["n_alice"]) + anc_a
    n_alice = width_a - anc_a
    n_bob = cs.n - width_a - anc_b
    ext = cfg.get("extensions", {})

    def local(key, width):
        return _gate_list_unitary(width, ext[key]) if key in ext else None

    def cliff(key):
        return CliffordTableau.from_gates(cs.n, ext[key]) if key in ext else None

    spec = ProtocolSpec(cs, n_alice, n_bob, anc_a, anc_b,
                        pre_alice=local("pre_alice", width_a), pre_bob=local("pre_bob", cs.n - width_a),
                        post_alice=local("post_alice", width_a), post_bob=local("post_bob", cs.n - width_a),
                        clifford_initial=cliff("clifford_initial"), clifford_final=cliff("clifford_final"))
    return spec, N


def load_run_config(path) -> dict:
    path = Path(path)
    cfg = json.loads(path.read_text())
    cfg["_base_dir"] = str(path.parent)
    return cfg
