"""Circuit fixtures used throughout the tests, demos and CLI."""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .circuit import CircuitStructure
from .qsim.statevector import random_unitary


def brickwork(n: int, d: int, gate=None, periodic: bool = True) -> CircuitStructure:
    """1-D brickwork of 2-qubit gates: odd layers on (0,1)(2,3)..., even layers shifted by one.

    With ``periodic`` the shifted layers wrap ``(n-1, 0)``.
    """
    if n % 2:
        raise ValueError("brickwork needs an even qubit count")
    layers = []
    for i in range(d):
        if i % 2 == 0:
            pairs = [(q, q + 1) for q in range(0, n, 2)]
        else:
            pairs = [(q, q + 1) for q in range(1, n - 1, 2)]
            if periodic and n > 2:
                pairs.append((n - 1, 0))
        layers.append([(p, gate) for p in pairs])
    return CircuitStructure.build(n, layers)


def all_to_all_tree(k: int, d: int, gate=None) -> CircuitStructure:
    """Tree circuit on ``k**d`` qubits where every gate has ``k`` distinct parents.

    Gate ``j`` of layer ``i`` acts on ``{j k^i + m k^(i-1) : m < k}``; the
    single top gate has ``|fm| = (k^d - 1)/(k - 1)``.
    """
    n = k**d
    layers = []
    for i in range(1, d + 1):
        row = []
        for j in range(k ** (d - i)):
            row.append((tuple(j * k**i + m * k ** (i - 1) for m in range(k)), gate))
        layers.append(row)
    return CircuitStructure.build(n, layers)


def single_gate(n: int, support, gate=None) -> CircuitStructure:
    return CircuitStructure.build(n, [[(tuple(support), gate)]])


def depth_one(n: int, k: int, gate=None) -> CircuitStructure:
    if n % k:
        raise ValueError("n must be a multiple of k")
    return CircuitStructure.build(n, [[(tuple(range(q, q + k)), gate) for q in range(0, n, k)]])


def factorized_blocks(n: int, block: Optional[int] = None, two_layer: bool = False,
                      rng: Optional[np.random.Generator] = None) -> CircuitStructure:
    """Product of unitaries on ``~log2 n``-qubit blocks, optionally with a second
    layer of equally sized blocks shifted by half a block so they straddle the first.

    With ``rng`` each block gets a Haar-random unitary; otherwise structure only.
    """
    if block is None:
        block = max(1, math.ceil(math.log2(n)))

    def tile(offset: int):
        qubits = [(q + offset) % n for q in range(n)]
        return [tuple(qubits[s:s + block]) for s in range(0, n, block)]

    def gate_for(support):
        return random_unitary(2 ** len(support), rng) if rng is not None else None

    layers = [[(s, gate_for(s)) for s in tile(0)]]
    if two_layer:
        layers.append([(s, gate_for(s)) for s in tile(block // 2 or 1)])
    return CircuitStructure.build(n, layers)


def cyclic_shift_with_ancillas(n: int) -> CircuitStructure:
    """Depth-2, k=2 SWAP network shifting ``n`` data qubits by one site using ``n`` ancillas.

    Register layout on ``2n`` qubits: Alice holds data ``0..n/2-1`` then
    ancillas ``0..n/2-1``; Bob holds the remaining data then ancillas. Data
    qubit ``q`` moves to site ``q+1 mod n``.
    """
    if n % 2:
        raise ValueError("shift fixture needs an even number of data qubits")
    h = n // 2

    def data(q):
        return q if q < h else 2 * h + (q - h)

    def anc(q):
        return h + q if q < h else 3 * h + (q - h)

    layer1 = [((data(q), anc((q + 1) % n)), "SWAP") for q in range(n)]
    layer2 = [((anc(q), data(q)), "SWAP") for q in range(n)]
    return CircuitStructure.build(2 * n, [layer1, layer2])


def cyclic_shift_chain(n: int) -> CircuitStructure:
    """Ancilla-free shift by one site as a sequential nearest-neighbour SWAP chain (depth n-1)."""
    layers = [[((q - 1, q), "SWAP")] for q in range(n - 1, 0, -1)]
    return CircuitStructure.build(n, layers)


def shift_unitary(n: int) -> np.ndarray:
    """Permutation matrix moving qubit ``q`` to site ``q+1 mod n``."""
    dim = 2**n
    u = np.zeros((dim, dim), dtype=complex)
    for b in range(dim):
        bits = [(b >> (n - 1 - q)) & 1 for q in range(n)]
        out = [bits[(q - 1) % n] for q in range(n)]
        u[int("".join(map(str, out)), 2), b] = 1
    return u


def random_circuit(n: int, d: int, k: int, rng: np.random.Generator, cover: bool = True,
                   unitaries: bool = True, min_k: int = 1) -> CircuitStructure:
    """Random layered circuit with gate sizes in ``[min_k, k]``.

    With ``cover`` every layer partitions all qubits, so the result has no
    idle-qubit gaps; otherwise each layer drops a random subset of blocks.
    """
    layers = []
    for _ in range(d):
        perm = [int(q) for q in rng.permutation(n)]
        row = []
        pos = 0
        while pos < n:
            size = int(rng.integers(min_k, k + 1))
            block = tuple(perm[pos:pos + size])
            pos += size
            if not cover and rng.random() < 0.3:
                continue
            row.append((block, random_unitary(2 ** len(block), rng) if unitaries else None))
        if not row:
            row.append((tuple(perm[:1]), random_unitary(2, rng) if unitaries else None))
        layers.append(row)
    return CircuitStructure.build(n, layers)


def random_uniform_circuit(n: int, d: int, k: int, rng: np.random.Generator,
                           fill: float = 1.0) -> CircuitStructure:
    """Random structure where every gate has exactly ``k`` qubits; ``fill`` is the fraction of blocks kept."""
    layers = []
    for _ in range(d):
        perm = [int(q) for q in rng.permutation(n)]
        blocks = [tuple(perm[s:s + k]) for s in range(0, n - k + 1, k)]
        kept = [b for b in blocks if rng.random() < fill] or blocks[:1]
        layers.append([(b, None) for b in kept])
    return CircuitStructure.build(n, layers)
