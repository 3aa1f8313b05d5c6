"""Dense statevector over a dynamic register of named subsystems.

The amplitudes are held as a tensor with one length-2 axis per qubit.
Axes are ordered by allocation, so the flattened vector has the first
allocated qubit as its most significant bit, and within a subsystem qubit
0 is the most significant. A gate matrix acting on ``targets`` uses the
same convention: ``targets[0]`` is the most significant bit of the matrix
index, so ``CNOT`` on ``(c, t)`` has control ``c``.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence, Union

import numpy as np

from .pauli import PauliString

UNITARY_ATOL = 1e-9
NORM_ATOL = 1e-9

Qubit = tuple[str, int]
Targets = Union[str, Qubit, Sequence[Union[str, Qubit]]]

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def is_unitary(u: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)


class StateVector:
    """Pure state over named subsystems.

    >>> sv = StateVector()
    >>> sv.allocate("a", 1)
    >>> sv.apply_unitary(np.array([[0, 1], [1, 0]]), "a")
    >>> sv.probabilities("a").round(3).tolist()
    [0.0, 1.0]
    """

    def __init__(self):
        self.tensor = np.ones((), dtype=complex)
        self._axes: list[Qubit] = []

    # bookkeeping --------------------------------------------------------

    @classmethod
    def from_amplitudes(cls, amplitudes: np.ndarray, layout: Sequence[tuple[str, int]]) -> "StateVector":
        """Build a state from a flat amplitude vector and ``[(name, qubits), ...]``."""
        sv = cls()
        m = sum(c for _, c in layout)
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**m:
            raise ValueError(f"expected {2**m} amplitudes, got {amps.size}")
        sv.tensor = amps.reshape((2,) * m).copy()
        for name, count in layout:
            if name in sv.names():
                raise ValueError(f"duplicate subsystem {name!r}")
            sv._axes.extend((name, i) for i in range(count))
        sv.check_norm()
        return sv

    @property
    def num_qubits(self) -> int:
        return len(self._axes)

    def names(self) -> list[str]:
        seen: dict[str, None] = {}
        for name, _ in self._axes:
            seen.setdefault(name, None)
        return list(seen)

    @property
    def labels(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for pos, (name, _) in enumerate(self._axes):
            out.setdefault(name, []).append(pos)
        return out

    def size(self, name: str) -> int:
        n = sum(1 for nm, _ in self._axes if nm == name)
        if n == 0:
            raise KeyError(f"unknown subsystem {name!r}")
        return n

    def __contains__(self, name: str) -> bool:
        return any(nm == name for nm, _ in self._axes)

    def copy(self) -> "StateVector":
        out = StateVector()
        out.tensor = self.tensor.copy()
        out._axes = list(self._axes)
        return out

    def _resolve(self, targets: Targets) -> list[int]:
        if isinstance(targets, str):
            targets = [targets]
        elif isinstance(targets, tuple) and len(targets) == 2 and isinstance(targets[0], str) \
                and isinstance(targets[1], (int, np.integer)):
            targets = [targets]
        axes: list[int] = []
        index = {q: i for i, q in enumerate(self._axes)}
        for t in targets:
            if isinstance(t, str):
                found = [i for i, (nm, _) in enumerate(self._axes) if nm == t]
                if not found:
                    raise KeyError(f"unknown subsystem {t!r}")
                found.sort(key=lambda i: self._axes[i][1])
                axes.extend(found)
            else:
                key = (t[0], int(t[1]))
                if key not in index:
                    raise KeyError(f"unknown qubit {key!r}")
                axes.append(index[key])
        if len(set(axes)) != len(axes):
            raise ValueError("repeated target qubit")
        return axes

    def qubits(self, name: str) -> list[Qubit]:
        return [(name, i) for i in range(self.size(name))]

    # allocation ---------------------------------------------------------

    def allocate(self, name, count: int, init: Union[str, int, Sequence[int]] = "zero") -> None:
        """Append ``count`` fresh qubits.

        ``init`` is ``"zero"``, a basis index/bit list, or ``"bell"``. For
        ``"bell"`` the name must be a pair ``(left, right)`` and ``count``
        even: ``count // 2`` Bell pairs are created with qubit ``i`` of
        ``left`` entangled with qubit ``i`` of ``right``.
        """
        if init == "bell":
            if count % 2:
                raise ValueError("bell-pair allocation needs an even qubit count")
            left, right = name
            for nm in (left, right):
                if nm in self:
                    raise ValueError(f"subsystem {nm!r} already allocated")
            half = count // 2
            d = 2**half
            omega = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
            self._extend(omega, [(left, half), (right, half)])
            return
        if name in self:
            raise ValueError(f"subsystem {name!r} already allocated")
        if init == "zero":
            bits = [0] * count
        elif isinstance(init, (int, np.integer)):
            bits = [(int(init) >> (count - 1 - i)) & 1 for i in range(count)]
        else:
            bits = [int(b) for b in init]
            if len(bits) != count:
                raise ValueError("basis bit list length differs from count")
        vec = np.zeros(2**count, dtype=complex)
        vec[int("".join(map(str, bits)) or "0", 2)] = 1.0
        self._extend(vec, [(name, count)])

    def allocate_state(self, name: str, vector: np.ndarray) -> None:
        """Append a subsystem prepared in an arbitrary normalised pure state."""
        vec = np.asarray(vector, dtype=complex).reshape(-1)
        count = int(round(np.log2(vec.size)))
        if 2**count != vec.size:
            raise ValueError("state length is not a power of two")
        if name in self:
            raise ValueError(f"subsystem {name!r} already allocated")
        if abs(np.linalg.norm(vec) - 1) > NORM_ATOL:
            raise ValueError("state is not normalised")
        self._extend(vec, [(name, count)])

    def _extend(self, vec: np.ndarray, layout: list[tuple[str, int]]) -> None:
        m = sum(c for _, c in layout)
        self.tensor = np.multiply.outer(self.tensor, vec.reshape((2,) * m))
        for nm, c in layout:
            self._axes.extend((nm, i) for i in range(c))

    def rename(self, old: str, new: str) -> None:
        if new in self:
            raise ValueError(f"subsystem {new!r} already allocated")
        self.size(old)
        self._axes = [(new, i) if nm == old else (nm, i) for nm, i in self._axes]

    def regroup(self, targets: Targets, new: str) -> None:
        """Give the listed qubits a fresh subsystem name, in the listed order."""
        axes = self._resolve(targets)
        owned = {i for i, (nm, _) in enumerate(self._axes) if nm == new}
        if owned - set(axes):
            raise ValueError(f"subsystem {new!r} already allocated")
        touched = {self._axes[a][0] for a in axes}
        labels = list(self._axes)
        for offset, a in enumerate(axes):
            labels[a] = (new, offset)
        # renumber whatever remains of the source subsystems
        for nm in touched - {new}:
            pos = sorted((i for i, (n2, _) in enumerate(labels) if n2 == nm), key=lambda i: labels[i][1])
            for offset, i in enumerate(pos):
                labels[i] = (nm, offset)
        self._axes = labels

    def reorder(self, names: Sequence[str]) -> None:
        """Permute axes so the listed subsystems come first, in order."""
        order = []
        for nm in names:
            order.extend(self._resolve(nm))
        order.extend(i for i in range(self.num_qubits) if i not in set(order))
        self.tensor = np.transpose(self.tensor, order)
        self._axes = [self._axes[i] for i in order]

    # evolution ----------------------------------------------------------

    def apply_unitary(self, u: np.ndarray, targets: Targets, check: bool = True) -> None:
        axes = self._resolve(targets)
        u = np.asarray(u, dtype=complex)
        k = len(axes)
        if u.shape != (2**k, 2**k):
            raise ValueError(f"operator of shape {u.shape} does not match {k} target qubits")
        if check and not is_unitary(u):
            raise ValueError("operator is not unitary")
        self._apply_matrix(u, axes)

    def apply_operator(self, op: np.ndarray, targets: Targets) -> None:
        """Apply an arbitrary (possibly non-unitary) linear map; no renormalisation."""
        axes = self._resolve(targets)
        k = len(axes)
        op = np.asarray(op, dtype=complex)
        if op.shape != (2**k, 2**k):
            raise ValueError("operator shape does not match targets")
        self._apply_matrix(op, axes)

    def _apply_matrix(self, u: np.ndarray, axes: list[int]) -> None:
        k = len(axes)
        if k == 0:
            self.tensor = self.tensor * u[0, 0]
            return
        ut = u.reshape((2,) * (2 * k))
        moved = np.tensordot(ut, self.tensor, axes=(list(range(k, 2 * k)), axes))
        self.tensor = np.moveaxis(moved, list(range(k)), axes)

    def apply_pauli(self, p: PauliString, targets: Targets) -> None:
        axes = self._resolve(targets)
        if p.num_qubits != len(axes):
            raise ValueError("Pauli size does not match targets")
        t = self.tensor.copy()
        for a, xb, zb in zip(axes, p.x, p.z):
            # X^x Z^z: the Z factor acts first
            if zb:
                idx = [slice(None)] * t.ndim
                idx[a] = 1
                t[tuple(idx)] *= -1
            if xb:
                t = np.flip(t, axis=a)
        self.tensor = np.ascontiguousarray(t) * (1j ** p.phase)

    def apply_isometry(self, v: np.ndarray, source: Targets, outputs: Sequence[tuple[str, int]]) -> None:
        """Replace the ``source`` qubits by new subsystems through an isometry.

        ``v`` has shape ``(2**out, 2**in)`` with ``out`` the total size of
        ``outputs`` (listed most significant first).
        """
        axes = self._resolve(source)
        k = len(axes)
        out = sum(c for _, c in outputs)
        v = np.asarray(v, dtype=complex)
        if v.shape != (2**out, 2**k):
            raise ValueError("isometry shape does not match source/outputs")
        if not np.allclose(v.conj().T @ v, np.eye(2**k), atol=UNITARY_ATOL):
            raise ValueError("map is not an isometry")
        for nm, _ in outputs:
            if nm in self:
                raise ValueError(f"subsystem {nm!r} already allocated")
        vt = v.reshape((2,) * (out + k))
        moved = np.tensordot(vt, self.tensor, axes=(list(range(out, out + k)), axes))
        # new axes first, then the untouched ones in their previous order
        keep = [q for i, q in enumerate(self._axes) if i not in set(axes)]
        self.tensor = np.moveaxis(moved, list(range(out)), list(range(len(keep), len(keep) + out)))
        self._axes = keep
        for nm, c in outputs:
            self._axes.extend((nm, i) for i in range(c))

    # measurement --------------------------------------------------------

    def probabilities(self, targets: Targets) -> np.ndarray:
        axes = self._resolve(targets)
        rest = [i for i in range(self.num_qubits) if i not in set(axes)]
        p = np.abs(self.tensor) ** 2
        p = np.transpose(p, axes + rest).reshape(2 ** len(axes), -1).sum(axis=1)
        return p

    def measure(self, targets: Targets, rng: np.random.Generator, basis: str = "Z") -> tuple[int, ...]:
        """Projectively measure ``targets``; returns one bit per qubit and collapses the state.

        ``basis`` is ``"Z"`` (computational), ``"X"``, or ``"bell"``. The
        Bell basis needs an even number of targets and pairs target ``i``
        with target ``i + len/2``; outcome bits are ``(z-parity, x-parity)``
        per pair in the usual CNOT-then-H encoding.
        """
        axes = self._resolve(targets)
        if basis == "X":
            for a in axes:
                self._apply_matrix(_H, [a])
        elif basis == "bell":
            if len(axes) % 2:
                raise ValueError("bell-basis measurement needs paired targets")
            h = len(axes) // 2
            for a, b in zip(axes[:h], axes[h:]):
                self._apply_matrix(_CNOT, [a, b])
                self._apply_matrix(_H, [a])
        elif basis != "Z":
            raise ValueError(f"invalid measurement basis {basis!r}")
        probs = self.probabilities([self._axes[a] for a in axes])
        probs = probs / probs.sum()
        outcome = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
        outcome = min(outcome, probs.size - 1)
        bits = tuple((outcome >> (len(axes) - 1 - i)) & 1 for i in range(len(axes)))
        self.project(axes, bits)
        if basis == "X":
            for a in axes:
                self._apply_matrix(_H, [a])
        return bits

    def project(self, axes: Sequence[int], bits: Sequence[int]) -> float:
        """Project onto a computational basis pattern and renormalise; returns its probability."""
        mask = np.zeros_like(self.tensor)
        idx = [slice(None)] * self.num_qubits
        for a, b in zip(axes, bits):
            idx[a] = b
        mask[tuple(idx)] = self.tensor[tuple(idx)]
        norm = np.linalg.norm(mask)
        if norm < 1e-15:
            raise ValueError("projection onto a zero-probability outcome")
        self.tensor = mask / norm
        return float(norm**2)

    def normalize(self) -> float:
        norm = float(np.linalg.norm(self.tensor))
        if norm < 1e-15:
            raise ValueError("cannot normalise a zero vector")
        self.tensor = self.tensor / norm
        return norm

    def check_norm(self, atol: float = NORM_ATOL) -> None:
        norm = np.linalg.norm(self.tensor)
        if abs(norm - 1) > atol:
            raise ValueError(f"state norm {norm} deviates from 1")

    # reduction ----------------------------------------------------------

    def density_matrix(self, targets: Targets | None = None) -> np.ndarray:
        """Reduced density matrix on ``targets`` (in listed order); all other qubits traced out."""
        if targets is None:
            v = self.tensor.reshape(-1)
            return np.outer(v, v.conj())
        axes = self._resolve(targets)
        rest = [i for i in range(self.num_qubits) if i not in set(axes)]
        m = np.transpose(self.tensor, axes + rest).reshape(2 ** len(axes), -1)
        return m @ m.conj().T

    def vector(self, targets: Targets | None = None) -> np.ndarray:
        """Flat amplitudes with ``targets`` first; the remaining qubits must be absent."""
        if targets is None:
            return self.tensor.reshape(-1).copy()
        axes = self._resolve(targets)
        if len(axes) != self.num_qubits:
            raise ValueError("vector() needs every qubit listed; use density_matrix for reductions")
        return np.transpose(self.tensor, axes).reshape(-1).copy()

    def schmidt_coefficients(self, targets: Targets) -> np.ndarray:
        axes = self._resolve(targets)
        rest = [i for i in range(self.num_qubits) if i not in set(axes)]
        m = np.transpose(self.tensor, axes + rest).reshape(2 ** len(axes), -1)
        return np.linalg.svd(m, compute_uv=False)

    def is_product(self, targets: Targets, atol: float = 1e-9) -> bool:
        s = self.schmidt_coefficients(targets)
        return bool(np.sum(s[1:] ** 2) < atol)

    def remove(self, name: str, atol: float = 1e-9) -> np.ndarray:
        """Drop an unentangled subsystem, keeping the remainder pure; returns the dropped state."""
        axes = self._resolve(name)
        rest = [i for i in range(self.num_qubits) if i not in set(axes)]
        m = np.transpose(self.tensor, axes + rest).reshape(2 ** len(axes), -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        if np.sum(s[1:] ** 2) > atol:
            raise ValueError(f"subsystem {name!r} is entangled with the rest")
        # fix the global phase so the remainder keeps the largest amplitude real-positive
        rest_vec = s[0] * vh[0]
        dropped = u[:, 0]
        self.tensor = rest_vec.reshape((2,) * len(rest)) if rest else rest_vec.reshape(())
        self._axes = [self._axes[i] for i in rest]
        return dropped

    def dump(self, atol: float = 1e-12) -> str:
        """Text dump: a layout line then one ``bitstring amplitude`` line per nonzero amplitude."""
        layout = " ".join(f"{nm}:{self.size(nm)}" for nm in self.names())
        lines = [f"# layout {layout}"]
        order = self._resolve(self.names())
        flat = np.transpose(self.tensor, order).reshape(-1)
        m = self.num_qubits
        for idx in np.flatnonzero(np.abs(flat) > atol):
            bits = format(int(idx), f"0{m}b") if m else ""
            a = flat[idx]
            lines.append(f"{bits} {a.real:+.12f}{a.imag:+.12f}i")
        return "\n".join(lines)

    def __repr__(self) -> str:
        parts = ", ".join(f"{nm}:{self.size(nm)}" for nm in self.names())
        return f"StateVector({parts})"


def allocate(sv: StateVector, name, count: int, init="zero") -> StateVector:
    sv.allocate(name, count, init)
    return sv


def apply_unitary(sv: StateVector, u: np.ndarray, targets: Targets) -> StateVector:
    sv.apply_unitary(u, targets)
    return sv


def apply_pauli(sv: StateVector, p: PauliString, targets: Targets) -> StateVector:
    sv.apply_pauli(p, targets)
    return sv


def measure(sv: StateVector, targets: Targets, rng: np.random.Generator, basis: str = "Z"):
    bits = sv.measure(targets, rng, basis)
    return bits, sv


def discard(sv: StateVector, name: str, atol: float = 1e-9) -> Union[StateVector, "DensityMatrix"]:
    """Trace out ``name``. Stays a StateVector when the subsystem is unentangled."""
    if sv.is_product(name, atol):
        sv.remove(name, atol)
        return sv
    keep = [nm for nm in sv.names() if nm != name]
    return DensityMatrix(sv.density_matrix(keep), [(nm, sv.size(nm)) for nm in keep])


def partial_trace(sv: StateVector, keep: Sequence[str]) -> "DensityMatrix":
    return DensityMatrix(sv.density_matrix(list(keep)), [(nm, sv.size(nm)) for nm in keep])


class DensityMatrix:
    """A density matrix with the subsystem layout it was reduced onto."""

    def __init__(self, matrix: np.ndarray, layout: Sequence[tuple[str, int]]):
        self.matrix = np.asarray(matrix, dtype=complex)
        self.layout = list(layout)
        dim = 2 ** sum(c for _, c in self.layout)
        if self.matrix.shape != (dim, dim):
            raise ValueError("matrix dimension does not match layout")

    def names(self) -> list[str]:
        return [nm for nm, _ in self.layout]

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


# state comparison helpers ---------------------------------------------------

def state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """``<psi|rho|psi>`` for a pure target ``psi``."""
    psi = np.asarray(psi).reshape(-1)
    return float(np.real(np.vdot(psi, rho @ psi)))


def trace_norm(a: np.ndarray) -> float:
    a = (a + a.conj().T) / 2
    return float(np.sum(np.abs(np.linalg.eigvalsh(a))))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * trace_norm(np.asarray(rho) - np.asarray(sigma))


def entropy(rho: np.ndarray) -> float:
    """Von Neumann entropy in nats."""
    w = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log(w)))


def random_state(num_qubits: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=2**num_qubits) + 1j * rng.normal(size=2**num_qubits)
    return v / np.linalg.norm(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def basis_states(num_qubits: int) -> Iterable[tuple[int, ...]]:
    return itertools.product((0, 1), repeat=num_qubits)
