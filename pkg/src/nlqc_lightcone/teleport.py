"""Normal and port-based teleportation.

Port-based teleportation (PBT) uses the square-root measurement over the
signals ``sigma_x = Phi_{C A_x} (x) I/d^(N-1)`` on the source ``C`` and
the sender halves ``A_1..A_N``. The completion element ``Pi_0`` (the
projector onto ``ker rho``) is folded in as ``Pi_x + Pi_0 / N``, so the
instrument has exactly ``N`` outcomes and is trace preserving.

The error channel of PBT can be computed three ways:

``simulate``  enumerate every outcome on a dense statevector (small N);
``operator``  partial trace of a single POVM element (``(N+1)k <= 12``);
``spin``      ``k = 1`` only: the POVM is block diagonal in the total spin
              of ports ``2..N``, so each block is at most ``4(2j+1)``-dimensional.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .qsim.channels import ChoiMatrix, diamond_bounds, identity_choi
from .qsim.pauli import PauliString
from .qsim.statevector import StateVector

PINV_RTOL = 1e-12
MAX_DENSE_POVM_QUBITS = 12
MAX_REGISTER_QUBITS = 22

_Y = np.array([[0, -1j], [1j, 0]])


class IntractableError(ValueError):
    """Raised when a dense construction would exceed the simulation budget."""


@dataclass(frozen=True)
class PauliKey:
    key: PauliString
    context: object = None

    @property
    def num_qubits(self) -> int:
        return self.key.num_qubits


@dataclass(frozen=True)
class PortIndex:
    value: int
    N: int

    def __post_init__(self):
        if not 1 <= self.value <= self.N:
            raise ValueError(f"port {self.value} outside [1, {self.N}]")


@dataclass(frozen=True)
class BellPair:
    """Names of the two halves of ``k`` Bell pairs (qubit ``i`` of each half paired)."""

    sender: str
    receiver: str


@dataclass(frozen=True)
class PortBlock:
    """``N`` Bell pairs of ``k`` qubits; halves are named ``<name>.s<x>`` / ``<name>.r<x>``
    unless explicit name lists are given."""

    name: str
    N: int
    k: int
    senders: Optional[tuple[str, ...]] = None
    receivers: Optional[tuple[str, ...]] = None

    def sender_half(self, x: int) -> str:
        return self.senders[x - 1] if self.senders else f"{self.name}.s{x}"

    def receiver_half(self, x: int) -> str:
        return self.receivers[x - 1] if self.receivers else f"{self.name}.r{x}"

    @property
    def sender_halves(self) -> list[str]:
        return [self.sender_half(x) for x in range(1, self.N + 1)]

    @property
    def receiver_halves(self) -> list[str]:
        return [self.receiver_half(x) for x in range(1, self.N + 1)]


def allocate_pair(sv: StateVector, sender: str, receiver: str, k: int) -> BellPair:
    sv.allocate((sender, receiver), 2 * k, "bell")
    return BellPair(sender, receiver)


def allocate_port_block(sv: StateVector, name: str, N: int, k: int,
                        senders: Optional[Sequence[str]] = None,
                        receivers: Optional[Sequence[str]] = None) -> PortBlock:
    block = PortBlock(name, N, k, tuple(senders) if senders else None,
                      tuple(receivers) if receivers else None)
    for x in range(1, N + 1):
        sv.allocate((block.sender_half(x), block.receiver_half(x)), 2 * k, "bell")
    return block


def _consume(sv: StateVector, targets, tag: str) -> None:
    sv.regroup(targets, tag)
    sv.remove(tag)


def uniform_index(u: float, size: int) -> int:
    """Inverse-CDF draw of a uniform index in ``[0, size)``."""
    return min(int(u * size), size - 1)


# normal teleportation ---------------------------------------------------

def key_from_bits(m_src: Sequence[int], m_snd: Sequence[int]) -> PauliString:
    """Key ``Z^{m_src} X^{m_snd}`` per qubit, written as ``i^phase X^x Z^z``."""
    x = tuple(int(b) for b in m_snd)
    z = tuple(int(b) for b in m_src)
    phase = (2 * sum(a & b for a, b in zip(x, z))) % 4
    return PauliString(x, z, phase)


def key_from_uniform(u: float, k: int) -> PauliString:
    """The key a Bell measurement would yield for the uniform draw ``u``."""
    idx = uniform_index(u, 4**k)
    bits = [(idx >> (2 * k - 1 - i)) & 1 for i in range(2 * k)]
    return key_from_bits(bits[:k], bits[k:])


def normal_teleport(sv: StateVector, source, pair: BellPair, rng: np.random.Generator,
                    context=None) -> tuple[PauliKey, StateVector]:
    """Bell-measure ``source`` with the sender half; the receiver half then holds ``P|psi>``."""
    src = sv._resolve(source)
    snd = sv._resolve(pair.sender)
    if len(src) != len(snd) or len(snd) != sv.size(pair.receiver):
        raise ValueError("source size does not match the Bell pair")
    k = len(src)
    src_q = [sv._axes[a] for a in src]
    snd_q = [sv._axes[a] for a in snd]
    bits = sv.measure(src_q + snd_q, rng, basis="bell")
    _consume(sv, src_q + snd_q, "__bell_consumed")
    return PauliKey(key_from_bits(bits[:k], bits[k:]), context), sv


# port-based teleportation ------------------------------------------------

def pbt_ideal(sv: StateVector, source, block: PortBlock, rng: np.random.Generator,
              u: Optional[float] = None) -> tuple[PortIndex, StateVector]:
    """Exact port teleportation: the source reappears unchanged at a uniformly random port."""
    src = [sv._axes[a] for a in sv._resolve(source)]
    if len(src) != block.k:
        raise ValueError("source size does not match block")
    u = rng.random() if u is None else u
    x = uniform_index(u, block.N) + 1
    _consume(sv, [block.sender_half(x), block.receiver_half(x)], "__port_consumed")
    sv.regroup(src, block.receiver_half(x))
    return PortIndex(x, block.N), sv


@dataclass
class PBTMeasurement:
    """Square-root measurement for ``N`` ports of ``k`` qubits.

    Stores only the element for port 1 on ``[C, A_1, ..., A_N]``; port ``x``
    is obtained by exchanging ``A_1`` and ``A_x``.
    """

    k: int
    N: int
    element: np.ndarray        # Pi_1 + Pi_0/N
    sqrt_element: np.ndarray
    completion: np.ndarray     # Pi_0

    @property
    def dim(self) -> int:
        return self.element.shape[0]

    def port_order(self, x: int) -> list[int]:
        """System order (0 = C, i = A_i) that maps port ``x`` into the slot of port 1."""
        order = list(range(self.N + 1))
        order[1], order[x] = order[x], order[1]
        return order

    def element_for(self, x: int) -> np.ndarray:
        return _permute_systems(self.element, self.port_order(x), 2**self.k)

    def completeness_residual(self) -> float:
        total = sum(self.element_for(x) for x in range(1, self.N + 1))
        return float(np.max(np.abs(total - np.eye(self.dim))))


def _permute_systems(op: np.ndarray, order: Sequence[int], d: int) -> np.ndarray:
    """Conjugate ``op`` by the permutation taking system ``order[i]`` to slot ``i``."""
    m = len(order)
    t = op.reshape((d,) * (2 * m))
    perm = list(order) + [m + o for o in order]
    return t.transpose(perm).reshape(op.shape)


def _psd_sqrt(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((a + a.conj().T) / 2)
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


@functools.lru_cache(maxsize=16)
def pbt_measurement(k: int, N: int) -> PBTMeasurement:
    if N < 1 or k < 1:
        raise ValueError("need N >= 1 and k >= 1")
    if (N + 1) * k > MAX_DENSE_POVM_QUBITS:
        raise IntractableError(f"dense POVM on {(N + 1) * k} qubits exceeds {MAX_DENSE_POVM_QUBITS}")
    d = 2**k
    rest = d ** (N - 1)
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    sigma1 = np.kron(np.outer(omega, omega), np.eye(rest)) / rest
    rho = sum(_permute_systems(sigma1, _swap_order(N, x), d) for x in range(1, N + 1))
    w, v = np.linalg.eigh(rho)
    keep = w > PINV_RTOL * w.max()
    r = (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].T
    ker = v[:, ~keep]
    completion = ker @ ker.T
    element = r @ sigma1 @ r + completion / N
    element = (element + element.T) / 2
    return PBTMeasurement(k, N, element, _psd_sqrt(element), completion)


def _swap_order(N: int, x: int) -> list[int]:
    order = list(range(N + 1))
    order[1], order[x] = order[x], order[1]
    return order


def pbt_physical(sv: StateVector, source, block: PortBlock, rng: np.random.Generator,
                 u: Optional[float] = None, env_name: Optional[str] = None) -> tuple[PortIndex, StateVector]:
    """Square-root-measurement PBT as a Lüders instrument on the source and sender halves.

    The measured systems stay in the register under ``env_name`` (they are
    generally entangled with the ports afterwards).
    """
    src = [sv._axes[a] for a in sv._resolve(source)]
    if len(src) != block.k:
        raise ValueError("source size does not match block")
    if sv.num_qubits > MAX_REGISTER_QUBITS:
        raise IntractableError(f"register of {sv.num_qubits} qubits exceeds {MAX_REGISTER_QUBITS}")
    meas = pbt_measurement(block.k, block.N)
    senders = [sv.qubits(nm) for nm in block.sender_halves]

    def targets(x):
        order = meas.port_order(x)
        systems = [src] + senders
        return [q for i in order for q in systems[i]]

    probs = []
    for x in range(1, block.N + 1):
        trial = sv.copy()
        trial.apply_operator(meas.sqrt_element, targets(x))
        probs.append(float(np.linalg.norm(trial.tensor) ** 2))
    probs = np.array(probs) / sum(probs)
    u = rng.random() if u is None else u
    x = min(int(np.searchsorted(np.cumsum(probs), u, side="right")), block.N - 1) + 1
    sv.apply_operator(meas.sqrt_element, targets(x))
    sv.normalize()
    env = env_name or f"{block.name}.env"
    sv.regroup(src + [q for s in senders for q in s], env)
    return PortIndex(x, block.N), sv


# error channel -----------------------------------------------------------

def _choi_from_element_trace(m: np.ndarray, k: int, N: int, scale: Optional[float] = None) -> np.ndarray:
    """Choi (output, reference) from ``M = tr_{A_2..A_N} (Pi_1 + Pi_0/N)`` on ``(C, A_1)``.

    ``J = N d^-(N+1) M^T`` with ``C`` relabelled as the reference and ``A_1``
    as the output port.
    """
    d = 2**k
    j4 = np.einsum("pqst->tsqp", m.reshape(d, d, d, d))
    if scale is None:
        scale = float(Fraction(N, d ** (N + 1)))
    return scale * j4.reshape(d * d, d * d)


def _channel_simulate(k: int, N: int) -> np.ndarray:
    if (2 * N + 2) * k > MAX_REGISTER_QUBITS:
        raise IntractableError(f"simulation needs {(2 * N + 2) * k} qubits")
    meas = pbt_measurement(k, N)
    d = 2**k
    sv = StateVector()
    sv.allocate(("R", "C"), 2 * k, "bell")
    block = allocate_port_block(sv, "P", N, k)
    systems = [sv.qubits("C")] + [sv.qubits(nm) for nm in block.sender_halves]
    j = np.zeros((d * d, d * d), dtype=complex)
    for x in range(1, N + 1):
        branch = sv.copy()
        branch.apply_operator(meas.sqrt_element, [q for i in meas.port_order(x) for q in systems[i]])
        j += branch.density_matrix([block.receiver_half(x), "R"])
    return j


def _channel_operator(k: int, N: int) -> np.ndarray:
    meas = pbt_measurement(k, N)
    d = 2**k
    t = meas.element.reshape(d * d, d ** (N - 1), d * d, d ** (N - 1))
    return _choi_from_element_trace(np.trace(t, axis1=1, axis2=3), k, N)


def _spin_ops(two_j: int) -> tuple[np.ndarray, np.ndarray]:
    j = two_j / 2
    m = j - np.arange(two_j + 1)
    sz = np.diag(m)
    sp = np.zeros((two_j + 1, two_j + 1))
    for i in range(1, two_j + 1):
        sp[i - 1, i] = np.sqrt(j * (j + 1) - m[i] * (m[i] + 1))
    return sz, sp


def spin_multiplicity(M: int, two_j: int) -> int:
    """Multiplicity of total spin ``j`` in ``M`` spin-1/2 particles."""
    a = (M - two_j) // 2
    return math.comb(M, a) - (math.comb(M, a - 1) if a >= 1 else 0)


def _channel_spin(N: int) -> np.ndarray:
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    psi = np.outer(singlet, singlet)
    hz, hp = _spin_ops(1)
    M = N - 1
    thresh = PINV_RTOL * (1 + N / 2)
    total = np.zeros((4, 4))
    for two_j in range(M % 2, M + 1, 2):
        dj = two_j + 1
        sz, sp = _spin_ops(two_j)
        ij = np.eye(dj)
        i2 = np.eye(2)
        dot = np.kron(np.kron(hz, i2), sz) + 0.5 * (np.kron(np.kron(hp, i2), sp.T)
                                                   + np.kron(np.kron(hp.T, i2), sp))
        sigma = np.kron(psi, ij)
        rho = sigma + (M / 4) * np.eye(4 * dj) - dot
        mval = np.array([mc + ma + (two_j / 2 - i)
                         for mc in (0.5, -0.5) for ma in (0.5, -0.5) for i in range(dj)])
        element = np.zeros_like(rho)
        for sector in np.unique(mval):
            idx = np.flatnonzero(mval == sector)
            sub = np.ix_(idx, idx)
            w, v = np.linalg.eigh(rho[sub])
            keep = w > thresh
            r = (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].T
            ker = v[:, ~keep]
            element[sub] = r @ sigma[sub] @ r + ker @ ker.T / N
        reduced = element.reshape(4, dj, 4, dj).trace(axis1=1, axis2=3)
        # exact weight: multiplicity times N / 2^(N+1)
        total += float(Fraction(spin_multiplicity(M, two_j) * N, 2 ** (N + 1))) * reduced
    yc = np.kron(_Y, np.eye(2))
    return _choi_from_element_trace(yc @ total @ yc, 1, N, scale=1.0)


def _auto_method(k: int, N: int) -> str:
    if (N + 1) * k <= 10:
        return "operator"
    if k == 1:
        return "spin"
    raise IntractableError(
        f"PBT channel for k={k}, N={N} needs a register of (2N+2)k = {(2 * N + 2) * k} qubits")


@functools.lru_cache(maxsize=64)
def _pbt_choi_cached(k: int, N: int, method: str) -> ChoiMatrix:
    if method == "simulate":
        j = _channel_simulate(k, N)
    elif method == "operator":
        j = _channel_operator(k, N)
    elif method == "spin":
        if k != 1:
            raise ValueError("the spin route is for k = 1")
        j = _channel_spin(N)
    else:
        raise ValueError(f"unknown method {method!r}")
    choi = ChoiMatrix(2**k, (j + j.conj().T) / 2)
    choi.validate()
    return choi


def pbt_error_channel(k: int, N: int, method: str = "auto") -> ChoiMatrix:
    """Choi matrix (output, reference) of the PBT channel at the selected port."""
    if k < 1 or N < 1:
        raise ValueError("need k >= 1 and N >= 1")
    if method == "auto":
        method = _auto_method(k, N)
    return _pbt_choi_cached(k, N, method)


def analytic_bound(k: int, N: int) -> float:
    """Diamond-norm bound ``4 * 2^{2k} / sqrt(N)`` for one port teleportation."""
    return 4 * 4**k / math.sqrt(N)


@dataclass(frozen=True)
class PBTBoundReport:
    k: int
    N: int
    lower: float
    upper: float
    analytic_bound: float
    avg_fidelity: float
    entanglement_fidelity: float

    def as_row(self) -> dict:
        return dict(k=self.k, N=self.N, lower=self.lower, upper=self.upper,
                    analytic_bound=self.analytic_bound, avg_fidelity=self.avg_fidelity)


def pbt_bound_report(k: int, N: int, method: str = "auto") -> PBTBoundReport:
    choi = pbt_error_channel(k, N, method)
    lower, upper = diamond_bounds(choi, identity_choi(2**k))
    bound = analytic_bound(k, N)
    if bound < 2 and lower > bound:
        raise AssertionError(f"lower bound {lower} exceeds {bound} at k={k}, N={N}")
    return PBTBoundReport(k, N, lower, upper, bound, choi.average_fidelity, choi.entanglement_fidelity)


def covariance_defect(choi: ChoiMatrix) -> float:
    """Distance of the channel from the depolarizing channel with the same entanglement fidelity."""
    d = choi.dim
    f = choi.entanglement_fidelity
    phi = identity_choi(d).matrix
    dep = f * phi + (1 - f) * (np.eye(d * d) - phi) / (d * d - 1)
    return float(np.max(np.abs(choi.matrix - dep)))
