"""Layered circuit decompositions and their causal structure.

A circuit is a list of layers; each layer is a list of gates with pairwise
disjoint supports. Layers and gate indices are 1-based, qubits are
0-based. ``parents``/``ancestors``/``family`` give the past light cone of
a gate, which alone determines the entanglement cost of the protocol.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .qsim.statevector import StateVector, is_unitary

_S2 = 1 / np.sqrt(2)
NAMED_GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def named_unitary(name: str) -> np.ndarray:
    try:
        return NAMED_GATES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown gate name {name!r}") from None


class CircuitError(ValueError):
    """Malformed or invalid circuit; ``line`` is set for parse errors."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class GateId(NamedTuple):
    layer: int
    index: int

    def __str__(self) -> str:
        return f"({self.layer},{self.index})"


@dataclass(frozen=True, eq=False)
class GateSpec:
    id: GateId
    support: tuple[int, ...]
    unitary: Optional[np.ndarray] = None
    name: Optional[str] = None

    @property
    def size(self) -> int:
        return len(self.support)

    @property
    def k(self) -> int:
        return len(self.support)

    def matrix(self) -> np.ndarray:
        if self.unitary is not None:
            return self.unitary
        if self.name is not None:
            return named_unitary(self.name)
        raise CircuitError(f"gate {self.id} has no unitary (structure-only circuit)")

    @property
    def has_unitary(self) -> bool:
        return self.unitary is not None or self.name is not None


FamilySet = frozenset  # of GateId


@dataclass(frozen=True, eq=False)
class CircuitStructure:
    n: int
    layers: tuple[tuple[GateSpec, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # construction -------------------------------------------------------

    @classmethod
    def build(cls, n: int, layers: Sequence[Sequence], validate: bool = True) -> "CircuitStructure":
        """Build from ``layers`` of ``(support, gate)`` pairs.

        ``gate`` may be a name, a matrix, or ``None`` (structure only); a bare
        support tuple is also accepted.
        """
        built = []
        for i, layer in enumerate(layers, start=1):
            row = []
            for j, item in enumerate(layer, start=1):
                if isinstance(item, GateSpec):
                    row.append(GateSpec(GateId(i, j), tuple(item.support), item.unitary, item.name))
                    continue
                if len(item) == 2 and not isinstance(item[0], (int, np.integer)):
                    support, gate = item
                else:
                    support, gate = item, None
                support = tuple(int(q) for q in support)
                if gate is None:
                    row.append(GateSpec(GateId(i, j), support))
                elif isinstance(gate, str):
                    row.append(GateSpec(GateId(i, j), support, name=gate.upper()))
                else:
                    row.append(GateSpec(GateId(i, j), support, unitary=np.asarray(gate, dtype=complex)))
            built.append(tuple(row))
        cs = cls(int(n), tuple(built))
        if validate:
            cs.validate()
        return cs

    def validate(self) -> None:
        if self.n < 1:
            raise CircuitError("qubit count must be positive")
        for layer in self.layers:
            used: set[int] = set()
            for g in layer:
                if not g.support:
                    raise CircuitError(f"gate {g.id} has empty support")
                if len(set(g.support)) != len(g.support):
                    raise CircuitError(f"gate {g.id} repeats a qubit")
                for q in g.support:
                    if not 0 <= q < self.n:
                        raise CircuitError(f"gate {g.id} qubit index {q} out of range for n={self.n}")
                overlap = used.intersection(g.support)
                if overlap:
                    raise CircuitError(f"overlapping supports in layer {g.id.layer} on qubits {sorted(overlap)}")
                used.update(g.support)
                if g.has_unitary:
                    u = g.matrix()
                    if u.shape != (2**g.k, 2**g.k):
                        raise CircuitError(f"gate {g.id} unitary dimension {u.shape} does not match k={g.k}")
                    if not is_unitary(u):
                        raise CircuitError(f"gate {g.id} matrix is not unitary")

    # queries ------------------------------------------------------------

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gates(self) -> list[GateSpec]:
        return [g for layer in self.layers for g in layer]

    def gate(self, gid: GateId) -> GateSpec:
        i, j = gid
        if not (1 <= i <= len(self.layers) and 1 <= j <= len(self.layers[i - 1])):
            raise KeyError(f"unknown gate {tuple(gid)}")
        return self.layers[i - 1][j - 1]

    @property
    def num_gates(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def is_structure_only(self) -> bool:
        return not all(g.has_unitary for g in self.gates())

    def supports(self) -> list[list[tuple[int, ...]]]:
        return [[g.support for g in layer] for layer in self.layers]

    def with_unitaries(self, unitaries: dict[GateId, np.ndarray]) -> "CircuitStructure":
        layers = [[(g.support, unitaries.get(g.id, g.unitary if g.unitary is not None else g.name))
                   for g in layer] for layer in self.layers]
        return CircuitStructure.build(self.n, layers)

    def apply_to(self, sv: StateVector, qubit_map: Sequence) -> None:
        """Apply every gate in order; ``qubit_map[q]`` is the (name, offset) of logical qubit q."""
        for g in self.gates():
            sv.apply_unitary(g.matrix(), [qubit_map[q] for q in g.support], check=False)

    def unitary(self) -> np.ndarray:
        if self.n > 12:
            raise CircuitError("dense unitary limited to 12 qubits")
        dim = 2**self.n
        cols = np.eye(dim, dtype=complex)
        tensor = cols.reshape((2,) * self.n + (dim,))
        for g in self.gates():
            k = g.k
            u = g.matrix().reshape((2,) * (2 * k))
            axes = list(g.support)
            moved = np.tensordot(u, tensor, axes=(list(range(k, 2 * k)), axes))
            tensor = np.moveaxis(moved, list(range(k)), axes)
        return tensor.reshape(dim, dim)

    def last_toucher(self, qubit: int, before_layer: int) -> Optional[GateId]:
        """Most recent gate acting on ``qubit`` in layers ``< before_layer``."""
        for i in range(before_layer - 1, 0, -1):
            for g in self.layers[i - 1]:
                if qubit in g.support:
                    return g.id
        return None

    def gaps(self) -> list[tuple[GateId, int, GateId]]:
        """Gate/qubit pairs whose previous toucher is not in the immediately preceding layer."""
        out = []
        for g in self.gates():
            for q in g.support:
                prev = self.last_toucher(q, g.id.layer)
                if prev is not None and prev.layer != g.id.layer - 1:
                    out.append((g.id, q, prev))
        return out

    def __repr__(self) -> str:
        return f"CircuitStructure(n={self.n}, depth={self.depth}, gates={self.num_gates})"


# causal structure -----------------------------------------------------------

def _check_gate(cs: CircuitStructure, g: GateId) -> GateId:
    g = GateId(*g)
    cs.gate(g)
    return g


def parents(cs: CircuitStructure, g: GateId) -> FamilySet:
    g = _check_gate(cs, g)
    cache = cs._cache.setdefault("parents", {})
    if g not in cache:
        if g.layer == 1:
            cache[g] = frozenset()
        else:
            support = set(cs.gate(g).support)
            cache[g] = frozenset(p.id for p in cs.layers[g.layer - 2] if support.intersection(p.support))
    return cache[g]


def ancestors(cs: CircuitStructure, g: GateId) -> FamilySet:
    """``anc(g) = pr(g) | anc(pr(g))``, memoised per gate."""
    g = _check_gate(cs, g)
    cache = cs._cache.setdefault("ancestors", {})
    if g not in cache:
        out = set(parents(cs, g))
        for p in parents(cs, g):
            out |= ancestors(cs, p)
        cache[g] = frozenset(out)
    return cache[g]


def family(cs: CircuitStructure, g: GateId) -> FamilySet:
    g = _check_gate(cs, g)
    return ancestors(cs, g) | {g}


def ancestors_bfs(cs: CircuitStructure, g: GateId) -> FamilySet:
    """Breadth-first closure of the overlap graph, written without the recursion."""
    g = _check_gate(cs, g)
    seen: set[GateId] = set()
    queue = deque([g])
    while queue:
        cur = queue.popleft()
        if cur.layer == 1:
            continue
        support = set(cs.layers[cur.layer - 1][cur.index - 1].support)
        for p in cs.layers[cur.layer - 2]:
            if support & set(p.support) and p.id not in seen:
                seen.add(p.id)
                queue.append(p.id)
    return frozenset(seen)


def lightcone_volume(cs: CircuitStructure) -> int:
    """``max_g k_g |fm(g)|``; equals ``k max |fm|`` when every gate has size k."""
    if cs.num_gates == 0:
        raise CircuitError("empty circuit has no light cone")
    return max(g.k * len(family(cs, g.id)) for g in cs.gates())


def max_family_size(cs: CircuitStructure) -> int:
    if cs.num_gates == 0:
        raise CircuitError("empty circuit")
    return max(len(family(cs, g.id)) for g in cs.gates())


def uniform_k(cs: CircuitStructure) -> Optional[int]:
    ks = {g.k for g in cs.gates()}
    return ks.pop() if len(ks) == 1 else None


# file format ----------------------------------------------------------------

def _parse_complex(token: str, line: int) -> complex:
    t = token.strip()
    if t in ("i", "+i", "j", "+j"):
        return 1j
    if t in ("-i", "-j"):
        return -1j
    t = re.sub(r"(?<=[+-])([ij])$", r"1\1", t)
    if t.endswith("i"):
        t = t[:-1] + "j"
    try:
        return complex(t)
    except ValueError:
        raise CircuitError(f"bad complex entry {token!r}", line) from None


def parse_circuit(text: str) -> CircuitStructure:
    """Parse the line-oriented circuit format.

    ::

        n=4
        layer
        gate 0,1 CNOT
        gate 2,3 matrix
        1 0 0 0
        ...
    """
    lines = text.splitlines()
    n = None
    layers: list[list] = []
    pos = 0

    def next_content() -> Optional[tuple[int, str]]:
        nonlocal pos
        while pos < len(lines):
            raw = lines[pos].split("#", 1)[0].strip()
            pos += 1
            if raw:
                return pos, raw
        return None

    while True:
        item = next_content()
        if item is None:
            break
        lineno, raw = item
        if raw.startswith("n="):
            if n is not None:
                raise CircuitError("duplicate header", lineno)
            try:
                n = int(raw[2:].strip())
            except ValueError:
                raise CircuitError(f"bad header {raw!r}", lineno) from None
            continue
        if n is None:
            raise CircuitError("missing 'n=<int>' header before content", lineno)
        if raw == "layer":
            layers.append([])
            used: set[int] = set()
            continue
        parts = raw.split()
        if parts[0] != "gate":
            raise CircuitError(f"unexpected line {raw!r}", lineno)
        if not layers:
            raise CircuitError("gate before any 'layer' line", lineno)
        if len(parts) not in (2, 3):
            raise CircuitError("expected 'gate <q0,q1,...> [NAME|matrix]'", lineno)
        try:
            support = tuple(int(q) for q in parts[1].split(",") if q != "")
        except ValueError:
            raise CircuitError(f"bad qubit list {parts[1]!r}", lineno) from None
        if not support:
            raise CircuitError("empty support", lineno)
        for q in support:
            if not 0 <= q < n:
                raise CircuitError(f"qubit index {q} out of range for n={n}", lineno)
        if used.intersection(support):
            raise CircuitError(f"overlapping supports in layer {len(layers)} on qubits "
                               f"{sorted(used.intersection(support))}", lineno)
        used.update(support)
        if len(parts) == 2:
            layers[-1].append((support, None))
        elif parts[2] == "matrix":
            dim = 2 ** len(support)
            rows = []
            for _ in range(dim):
                nxt = next_content()
                if nxt is None:
                    raise CircuitError("matrix truncated", lineno)
                rl, rtext = nxt
                entries = [_parse_complex(tok, rl) for tok in rtext.split()]
                if len(entries) != dim:
                    raise CircuitError(f"matrix row has {len(entries)} entries, expected {dim}", rl)
                rows.append(entries)
            mat = np.array(rows, dtype=complex)
            if not is_unitary(mat):
                raise CircuitError("matrix is not unitary", lineno)
            layers[-1].append((support, mat))
        else:
            name = parts[2].upper()
            if name not in NAMED_GATES:
                raise CircuitError(f"unknown gate name {parts[2]!r}", lineno)
            if NAMED_GATES[name].shape[0] != 2 ** len(support):
                raise CircuitError(f"gate {name} does not act on {len(support)} qubits", lineno)
            layers[-1].append((support, name))
    if n is None:
        raise CircuitError("missing 'n=<int>' header")
    try:
        return CircuitStructure.build(n, layers)
    except CircuitError as exc:
        raise CircuitError(str(exc)) from None


def load_circuit(path) -> CircuitStructure:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def format_circuit(cs: CircuitStructure) -> str:
    out = [f"n={cs.n}"]
    for layer in cs.layers:
        out.append("layer")
        for g in layer:
            qs = ",".join(map(str, g.support))
            if g.name is not None:
                out.append(f"gate {qs} {g.name}")
            elif g.unitary is not None:
                out.append(f"gate {qs} matrix")
                for row in g.unitary:
                    out.append(" ".join(_fmt_complex(z) for z in row))
            else:
                out.append(f"gate {qs}")
    return "\n".join(out) + "\n"


def iter_gate_ids(cs: CircuitStructure) -> Iterable[GateId]:
    for g in cs.gates():
        yield g.id


def pad_idle_qubits(cs: CircuitStructure) -> CircuitStructure:
    """Insert single-qubit identity gates so every gap in a qubit's history is closed.

    After padding, each gate's previously-touched qubits were last touched in
    the layer directly before it, which the protocol engine requires.
    """
    extra: dict[int, list[int]] = {}
    for gid, q, prev in cs.gaps():
        for layer in range(prev.layer + 1, gid.layer):
            extra.setdefault(layer, []).append(q)
    if not extra:
        return cs
    layers = []
    for i, layer in enumerate(cs.layers, start=1):
        row = [(g.support, g.unitary if g.unitary is not None else g.name) for g in layer]
        row.extend(((q,), "I") for q in sorted(set(extra.get(i, []))))
        layers.append(row)
    return CircuitStructure.build(cs.n, layers)
