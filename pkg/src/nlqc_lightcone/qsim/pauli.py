"""Pauli strings in symplectic form and Clifford tableaux.

A Pauli string on ``m`` qubits is stored as two bit vectors ``x`` and ``z``
and a phase exponent ``phase`` so that the operator is

    i**phase * X^x[0] Z^z[0]  (x)  X^x[1] Z^z[1]  (x) ...

Qubit 0 is the leftmost tensor factor, matching :mod:`.statevector`.
Note that with this convention ``Y = i X Z`` has ``phase == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_XZ = _X @ _Z

_LETTERS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}


@dataclass(frozen=True)
class PauliString:
    x: tuple[int, ...]
    z: tuple[int, ...]
    phase: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z bit vectors differ in length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    # construction -------------------------------------------------------

    @classmethod
    def identity(cls, m: int) -> "PauliString":
        return cls((0,) * m, (0,) * m)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse labels such as ``"XIZ"``, ``"-iYY"`` or ``"+X"``.

        Letters denote the Hermitian Paulis, so ``"Y"`` is stored with
        ``phase == 1``.
        """
        sign = 0
        body = label
        for prefix, ph in (("+i", 1), ("-i", 3), ("i", 1), ("+", 0), ("-", 2)):
            if body.startswith(prefix):
                sign = ph
                body = body[len(prefix):]
                break
        x, z = [], []
        phase = sign
        for ch in body:
            if ch == "I":
                x.append(0), z.append(0)
            elif ch == "X":
                x.append(1), z.append(0)
            elif ch == "Z":
                x.append(0), z.append(1)
            elif ch == "Y":
                x.append(1), z.append(1)
                phase += 1
            else:
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}")
        return cls(tuple(x), tuple(z), phase)

    @classmethod
    def single(cls, m: int, qubit: int, letter: str) -> "PauliString":
        label = ["I"] * m
        label[qubit] = letter
        return cls.from_label("".join(label))

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, hermitian: bool = True) -> "PauliString":
        x = rng.integers(0, 2, size=m)
        z = rng.integers(0, 2, size=m)
        phase = int(np.dot(x, z)) if hermitian else int(rng.integers(0, 4))
        return cls(tuple(x), tuple(z), phase)

    # properties ---------------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return len(self.x)

    @property
    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    def is_hermitian(self) -> bool:
        return (self.phase - self._y_count()) % 2 == 0

    def _y_count(self) -> int:
        return sum(a & b for a, b in zip(self.x, self.z))

    def label(self) -> str:
        # phase relative to the Hermitian letters
        rel = (self.phase - self._y_count()) % 4
        prefix = ("", "i", "-", "-i")[rel]
        return prefix + "".join(_LETTERS[a, b] for a, b in zip(self.x, self.z))

    def __repr__(self) -> str:
        return f"PauliString({self.label()!r})"

    # algebra ------------------------------------------------------------

    def __mul__(self, other: "PauliString") -> "PauliString":
        if self.num_qubits != other.num_qubits:
            raise ValueError("Pauli size mismatch")
        # Z^z1 X^x2 = (-1)^{z1.x2} X^x2 Z^z1
        swap = sum(a & b for a, b in zip(self.z, other.x))
        x = tuple(a ^ b for a, b in zip(self.x, other.x))
        z = tuple(a ^ b for a, b in zip(self.z, other.z))
        return PauliString(x, z, self.phase + other.phase + 2 * swap)

    def dagger(self) -> "PauliString":
        # (X^x Z^z)^dag = Z^z X^x = (-1)^{x.z} X^x Z^z
        return PauliString(self.x, self.z, -self.phase + 2 * self._y_count())

    def commutes(self, other: "PauliString") -> bool:
        s = sum(a & d for a, d in zip(self.x, other.z)) + sum(b & c for b, c in zip(self.z, other.x))
        return s % 2 == 0

    def restrict(self, qubits: Sequence[int]) -> "PauliString":
        """Keep only the tensor factors on ``qubits`` (in that order).

        The global phase is dropped: restrictions are only ever used as
        corrections, where a phase is irrelevant.
        """
        x = tuple(self.x[q] for q in qubits)
        z = tuple(self.z[q] for q in qubits)
        return PauliString(x, z, sum(a & b for a, b in zip(x, z)))

    def embed(self, qubits: Sequence[int], m: int) -> "PauliString":
        """Place this string on positions ``qubits`` of an ``m``-qubit register."""
        if len(qubits) != self.num_qubits:
            raise ValueError("embedding size mismatch")
        x, z = [0] * m, [0] * m
        for q, a, b in zip(qubits, self.x, self.z):
            x[q], z[q] = a, b
        return PauliString(tuple(x), tuple(z), self.phase)

    def tensor(self, other: "PauliString") -> "PauliString":
        return PauliString(self.x + other.x, self.z + other.z, self.phase + other.phase)

    def without_phase(self) -> "PauliString":
        return PauliString(self.x, self.z, self._y_count())

    def to_matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.x, self.z):
            f = _XZ if (a and b) else _X if a else _Z if b else _I2
            out = np.kron(out, f)
        return (1j ** self.phase) * out


def pauli_product(paulis: Iterable[PauliString]) -> PauliString:
    it = iter(paulis)
    out = next(it)
    for p in it:
        out = out * p
    return out


def decompose_pauli(matrix: np.ndarray, atol: float = 1e-9) -> PauliString:
    """Return the PauliString equal to ``matrix``, which must be a Pauli times a fourth root of unity."""
    dim = matrix.shape[0]
    m = int(round(np.log2(dim)))
    if 2**m != dim or matrix.shape != (dim, dim):
        raise ValueError("matrix is not a square power-of-two operator")
    # locate the permutation part from the first column
    col = matrix[:, 0]
    row = int(np.argmax(np.abs(col)))
    xbits = [(row >> (m - 1 - q)) & 1 for q in range(m)]
    zbits = []
    base = PauliString(tuple(xbits), (0,) * m).to_matrix()
    diag = np.diag(base.conj().T @ matrix)
    # diag of Z^z: sign pattern (-1)^{z.b}
    for q in range(m):
        ratio = diag[1 << (m - 1 - q)] / diag[0]
        zbits.append(0 if ratio.real > 0 else 1)
    cand = PauliString(tuple(xbits), tuple(zbits))
    mat = cand.to_matrix()
    overlap = np.vdot(mat, matrix) / dim
    for ph in range(4):
        if abs(overlap - 1j**ph) < 1e-6:
            out = PauliString(cand.x, cand.z, ph)
            if not np.allclose(out.to_matrix(), matrix, atol=atol):
                break
            return out
    raise ValueError("matrix is not a scaled Pauli operator")


class CliffordTableau:
    """Images of the generators X_q and Z_q under conjugation ``P -> C P C^dag``."""

    def __init__(self, x_images: Sequence[PauliString], z_images: Sequence[PauliString]):
        if len(x_images) != len(z_images):
            raise ValueError("tableau needs as many X images as Z images")
        self.x_images = tuple(x_images)
        self.z_images = tuple(z_images)
        m = len(self.x_images)
        for p in self.x_images + self.z_images:
            if p.num_qubits != m:
                raise ValueError("tableau image size mismatch")

    @property
    def num_qubits(self) -> int:
        return len(self.x_images)

    @classmethod
    def identity(cls, m: int) -> "CliffordTableau":
        return cls([PauliString.single(m, q, "X") for q in range(m)],
                   [PauliString.single(m, q, "Z") for q in range(m)])

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "CliffordTableau":
        """Build the tableau of a dense Clifford unitary; raises ValueError if ``u`` is not Clifford."""
        dim = u.shape[0]
        m = int(round(np.log2(dim)))
        xs, zs = [], []
        for q in range(m):
            for letter, store in (("X", xs), ("Z", zs)):
                p = PauliString.single(m, q, letter).to_matrix()
                try:
                    store.append(decompose_pauli(u @ p @ u.conj().T))
                except ValueError:
                    raise ValueError("unitary is not a Clifford (a generator image is not a Pauli)") from None
        return cls(xs, zs)

    @classmethod
    def from_gates(cls, m: int, gates: Iterable[tuple[str, Sequence[int]]]) -> "CliffordTableau":
        """Compose named Clifford gates applied in order, e.g. ``[("H", [0]), ("CNOT", [0, 1])]``."""
        from ..circuit import named_unitary

        tab = cls.identity(m)
        for name, qubits in gates:
            g = cls.from_unitary(named_unitary(name)).embed(qubits, m)
            tab = g.compose(tab)
        return tab

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, depth: int | None = None) -> "CliffordTableau":
        names = ["H", "S", "CNOT", "CZ", "X", "Z", "SWAP"]
        gates = []
        for _ in range(depth if depth is not None else 4 * m * m + 4):
            name = names[int(rng.integers(len(names)))]
            k = 2 if name in ("CNOT", "CZ", "SWAP") else 1
            if k > m:
                name, k = "H", 1
            gates.append((name, [int(q) for q in rng.choice(m, size=k, replace=False)]))
        return cls.from_gates(m, gates)

    def embed(self, qubits: Sequence[int], m: int) -> "CliffordTableau":
        """Act with this tableau on ``qubits`` of a larger register, identity elsewhere."""
        xs = [PauliString.single(m, q, "X") for q in range(m)]
        zs = [PauliString.single(m, q, "Z") for q in range(m)]
        for local, q in enumerate(qubits):
            xs[q] = self.x_images[local].embed(qubits, m)
            zs[q] = self.z_images[local].embed(qubits, m)
        return CliffordTableau(xs, zs)

    def conjugate(self, p: PauliString) -> PauliString:
        """Return ``C P C^dag``."""
        if p.num_qubits != self.num_qubits:
            raise ValueError("Pauli and tableau sizes differ")
        out = PauliString((0,) * p.num_qubits, (0,) * p.num_qubits, p.phase)
        for q, bit in enumerate(p.x):
            if bit:
                out = out * self.x_images[q]
        for q, bit in enumerate(p.z):
            if bit:
                out = out * self.z_images[q]
        return out

    def compose(self, first: "CliffordTableau") -> "CliffordTableau":
        """Tableau of ``self . first`` (``first`` applied before ``self``)."""
        return CliffordTableau([self.conjugate(p) for p in first.x_images],
                               [self.conjugate(p) for p in first.z_images])

    def is_symplectic(self) -> bool:
        m = self.num_qubits
        for a in range(m):
            if not self.x_images[a].is_hermitian() or not self.z_images[a].is_hermitian():
                return False
            for b in range(m):
                if not self.x_images[a].commutes(self.x_images[b]):
                    return False
                if not self.z_images[a].commutes(self.z_images[b]):
                    return False
                if self.x_images[a].commutes(self.z_images[b]) != (a != b):
                    return False
        return True

    def to_unitary(self) -> np.ndarray:
        """Dense unitary (up to global phase) with this conjugation action.

        Column ``b`` is ``C|b> = C X^b C^dag C|0>``; ``C|0>`` is the joint +1
        eigenvector of the Z images.
        """
        if not self.is_symplectic():
            raise ValueError("tableau is not a valid Clifford")
        m = self.num_qubits
        dim = 2**m
        proj = np.eye(dim, dtype=complex)
        for zimg in self.z_images:
            proj = proj @ (np.eye(dim) + zimg.to_matrix()) / 2
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        v0 = proj[:, col] / np.linalg.norm(proj[:, col])
        ximg = [p.to_matrix() for p in self.x_images]
        u = np.zeros((dim, dim), dtype=complex)
        for b in range(dim):
            v = v0
            for q in range(m):
                if (b >> (m - 1 - q)) & 1:
                    v = ximg[q] @ v
            u[:, b] = v
        return u

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, CliffordTableau) and self.x_images == other.x_images
                and self.z_images == other.z_images)

    def __repr__(self) -> str:
        xs = ", ".join(p.label() for p in self.x_images)
        zs = ", ".join(p.label() for p in self.z_images)
        return f"CliffordTableau(X->[{xs}], Z->[{zs}])"
