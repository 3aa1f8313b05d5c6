"""Choi matrices and the trace-norm sandwich for the diamond distance.

Choi matrices are normalised as states: ``J = (E (x) id)(|Omega><Omega|)``
with ``|Omega> = sum_i |ii> / sqrt(d)``. The channel acts on the first
tensor factor and the reference is the second.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .statevector import trace_norm

PSD_ATOL = 1e-9
TRACE_ATOL = 1e-9


@dataclass
class ChoiMatrix:
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (self.dim**2, self.dim**2):
            raise ValueError("Choi matrix shape does not match dim")

    def validate(self, atol: float = PSD_ATOL) -> None:
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=atol):
            raise ValueError("Choi matrix is not Hermitian")
        w = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if w.min() < -atol:
            raise ValueError(f"Choi matrix not PSD (min eigenvalue {w.min():.3e})")
        if abs(np.trace(m).real - 1) > TRACE_ATOL:
            raise ValueError("Choi matrix trace differs from 1")
        # trace preservation: reduced state on the reference is maximally mixed
        red = np.trace(m.reshape(self.dim, self.dim, self.dim, self.dim), axis1=0, axis2=2)
        if not np.allclose(red, np.eye(self.dim) / self.dim, atol=1e-6):
            raise ValueError("channel is not trace preserving")

    @property
    def entanglement_fidelity(self) -> float:
        omega = np.eye(self.dim).reshape(-1) / np.sqrt(self.dim)
        return float(np.real(omega @ self.matrix @ omega))

    @property
    def average_fidelity(self) -> float:
        d = self.dim
        return (d * self.entanglement_fidelity + 1) / (d + 1)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Apply the channel: ``E(rho) = d tr_ref[J (I (x) rho^T)]``."""
        d = self.dim
        j = self.matrix.reshape(d, d, d, d)
        return d * np.einsum("aibj,ij->ab", j, np.asarray(rho))

    def kraus(self, atol: float = 1e-12) -> list[np.ndarray]:
        return kraus_from_choi(self, atol)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


def choi_of(channel: Callable[[np.ndarray], np.ndarray], dim: int, tp_atol: float = 1e-6) -> ChoiMatrix:
    """Choi matrix of a linear map given as a callable on ``dim x dim`` operators."""
    j = np.zeros((dim, dim, dim, dim), dtype=complex)
    for a in range(dim):
        for b in range(dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[a, b] = 1.0
            out = np.asarray(channel(e), dtype=complex)
            if out.shape != (dim, dim):
                raise ValueError("channel must map dim x dim operators to dim x dim operators")
            if abs(np.trace(out) - (1.0 if a == b else 0.0)) > tp_atol:
                raise ValueError("channel is not trace preserving")
            j[:, a, :, b] = out
    return ChoiMatrix(dim, j.reshape(dim * dim, dim * dim) / dim)


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> ChoiMatrix:
    dim = kraus[0].shape[1]
    omega = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    j = np.zeros((dim * dim, dim * dim), dtype=complex)
    for k in kraus:
        v = np.kron(k, np.eye(dim)) @ omega
        j += np.outer(v, v.conj())
    return ChoiMatrix(dim, j)


def kraus_from_choi(choi: ChoiMatrix, atol: float = 1e-12) -> list[np.ndarray]:
    d = choi.dim
    w, v = np.linalg.eigh(d * (choi.matrix + choi.matrix.conj().T) / 2)
    out = []
    for lam, vec in zip(w, v.T):
        if lam > atol:
            out.append(np.sqrt(lam) * vec.reshape(d, d))
    return out


def stinespring_isometry(choi: ChoiMatrix, env_qubits: int | None = None) -> np.ndarray:
    """Isometry ``V`` with ``E(rho) = tr_env V rho V^dag``; rows ordered (output, env)."""
    kraus = kraus_from_choi(choi)
    d = choi.dim
    if env_qubits is None:
        env_qubits = max(1, int(np.ceil(np.log2(len(kraus)))))
    env = 2**env_qubits
    if len(kraus) > env:
        raise ValueError("environment too small for the Kraus rank")
    v = np.zeros((d, env, d), dtype=complex)
    for l, k in enumerate(kraus):
        v[:, l, :] = k
    return v.reshape(d * env, d)


def identity_choi(dim: int) -> ChoiMatrix:
    omega = np.eye(dim, dtype=complex).reshape(-1) / np.sqrt(dim)
    return ChoiMatrix(dim, np.outer(omega, omega.conj()))


def depolarizing_choi(dim: int, p: float = 1.0) -> ChoiMatrix:
    """``rho -> (1-p) rho + p tr(rho) I/d``."""
    return ChoiMatrix(dim, (1 - p) * identity_choi(dim).matrix + p * np.eye(dim * dim) / dim**2)


def unitary_choi(u: np.ndarray) -> ChoiMatrix:
    return choi_from_kraus([np.asarray(u, dtype=complex)])


def diamond_bounds(j1: ChoiMatrix, j2: ChoiMatrix) -> tuple[float, float]:
    """Lower and upper bounds on the diamond distance ``||E1 - E2||_diamond``.

    The lower bound is the trace norm of the Choi difference (the
    maximally entangled input is one admissible input); the upper bound is
    ``d`` times that.
    """
    if j1.dim != j2.dim:
        raise ValueError("channels act on different dimensions")
    lower = trace_norm(j1.matrix - j2.matrix)
    return lower, j1.dim * lower
