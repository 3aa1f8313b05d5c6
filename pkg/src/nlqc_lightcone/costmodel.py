"""Entanglement cost of the light-cone protocol.

Exact quantities (port count, Bell-pair total) use integer and
``Fraction`` arithmetic; bounds that overflow any float are reported as
base-2 logarithms.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .circuit import CircuitStructure, GateId, family, lightcone_volume

Number = Union[int, Fraction]

REGIMES = ("polynomial", "quasi-polynomial", "quasi-quasi-polynomial", "unclassified")
SCALING_TAGS = ("constant", "loglog", "polylog", "poly")


@dataclass(frozen=True)
class AccuracyTarget:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.epsilon > 2:
            raise ValueError("epsilon above 2 is vacuous for the diamond norm")

    @property
    def exact(self) -> Fraction:
        # decimal reading of the float, so 0.1 means 1/10
        return Fraction(repr(float(self.epsilon)))


@dataclass(frozen=True)
class ScalingClass:
    """Growth class of ``k(n)`` or ``d(n)``; ``degree`` is the polylog/poly exponent."""

    tag: str
    degree: float = 1.0

    def __post_init__(self):
        if self.tag not in SCALING_TAGS:
            raise ValueError(f"scaling tag must be one of {SCALING_TAGS}")
        if not self.degree > 0:
            raise ValueError("degree must be positive")

    @property
    def rank(self) -> int:
        return SCALING_TAGS.index(self.tag)


@dataclass(frozen=True)
class GeoParams:
    D: int = 1
    alpha: float = 1.0

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("spatial dimension must be at least 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


@dataclass(frozen=True)
class GateCost:
    gate: GateId
    k: int
    fm: int
    pairs: Number


@dataclass
class CostReport:
    N: Number
    E: Number
    per_gate: list[GateCost]
    error_budget: float
    bounds: dict[str, float] = field(default_factory=dict)
    initial_pairs: int = 0

    def __post_init__(self):
        if self.E != sum(g.pairs for g in self.per_gate):
            raise ValueError("E differs from the per-gate sum")

    @property
    def total_with_initial(self) -> Number:
        return self.E + self.initial_pairs

    def to_dict(self) -> dict:
        def num(x):
            return str(x) if isinstance(x, Fraction) else int(x)

        return {
            "N": num(self.N),
            "E": num(self.E),
            "log2_E": _log2(self.E),
            "initial_pairs": self.initial_pairs,
            "per_gate": [
                {"gate": [g.gate.layer, g.gate.index], "k": g.k, "fm": g.fm, "pairs": num(g.pairs)}
                for g in self.per_gate
            ],
            "error_budget": self.error_budget,
            "bounds": dict(self.bounds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_table(self) -> str:
        rows = [("gate", "k", "|fm|", "pairs")]
        rows += [(str(g.gate), str(g.k), str(g.fm), str(g.pairs)) for g in self.per_gate]
        widths = [max(len(r[c]) for r in rows) for c in range(4)]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append("")
        lines.append(f"N              {self.N}")
        lines.append(f"E              {self.E}  (log2 {_log2(self.E):.3f})")
        lines.append(f"initial pairs  {self.initial_pairs}")
        lines.append(f"error budget   {self.error_budget:.6g}")
        for name, value in sorted(self.bounds.items()):
            lines.append(f"{name:<22} {value:.6g}")
        return "\n".join(lines)


def _log2(x: Number) -> float:
    if isinstance(x, Fraction):
        return _log2(x.numerator) - _log2(x.denominator)
    x = int(x)
    if x <= 0:
        raise ValueError("log of a non-positive number")
    # exact for huge ints: split off the top 53 bits
    shift = max(0, x.bit_length() - 60)
    return math.log2(x >> shift) + shift


def _epsilon(target: Union[AccuracyTarget, float]) -> AccuracyTarget:
    return target if isinstance(target, AccuracyTarget) else AccuracyTarget(float(target))


def _weight(cs: CircuitStructure) -> int:
    return sum(2 ** (2 * g.k) for g in cs.gates())


def ports_required_exact(cs: CircuitStructure, target: Union[AccuracyTarget, float]) -> Fraction:
    """Unrounded ``(4/eps * sum 2^{2k})^2``."""
    eps = _epsilon(target).exact
    return (4 * _weight(cs) / eps) ** 2


def ports_required(cs: CircuitStructure, target: Union[AccuracyTarget, float]) -> int:
    """Smallest integer ``N`` meeting the accuracy target: ``ceil((4/eps * sum 2^{2k})^2)``."""
    if cs.num_gates == 0:
        raise ValueError("empty circuit")
    exact = ports_required_exact(cs, target)
    n = max(1, math.ceil(exact))
    # float guard: the reported budget must not exceed eps by rounding
    while error_budget(cs, n) > _epsilon(target).epsilon:
        n += 1
    return n


def entanglement_cost(cs: CircuitStructure, N: Number) -> CostReport:
    """Exact Bell-pair count ``E = 2 sum k N^|fm|`` with per-gate breakdown."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not isinstance(N, Fraction):
        if int(N) != N:
            raise ValueError("N must be an integer or a Fraction")
        N = int(N)
    per_gate = []
    for g in cs.gates():
        fm = len(family(cs, g.id))
        per_gate.append(GateCost(g.id, g.k, fm, 2 * g.k * N**fm))
    E = sum(p.pairs for p in per_gate)
    return CostReport(N=N, E=E, per_gate=per_gate, error_budget=error_budget(cs, N),
                      initial_pairs=cs.n // 2)


def cost_upper_bound(n: int, d: int, k: int, target: Union[AccuracyTarget, float], V: int) -> float:
    """``log2`` of ``2nd (4nd 2^{2k} / (eps k))^{2V/k}``."""
    for name, val in (("n", n), ("d", d), ("k", k), ("V", V)):
        if val < 1:
            raise ValueError(f"{name} must be positive")
    if V < k:
        raise ValueError("V must be at least k")
    eps = _epsilon(target).exact
    base = Fraction(4 * n * d * 4**k) / (eps * k)
    return _log2(2 * n * d) + Fraction(2 * V, k) * _log2(base)


def asymptotic_bounds(n: int, k: int, d: int, geo: Optional[GeoParams] = None,
                      V: Optional[int] = None) -> dict[str, float]:
    """Exponents ``a`` in ``E ~ n^a``: generic ``4V``, all-to-all ``4k^d`` and, with ``geo``, ``4 alpha k d^(D+1)``.

    ``V`` defaults to the all-to-all value ``sum_{i<=d} k^i``. Each exponent
    is also reported as ``log2_*`` = exponent times ``log2 n``.
    """
    if n < 1 or k < 1:
        raise ValueError("n and k must be positive")
    if d < 1:
        raise ValueError("depth 0 is degenerate: there is no light cone")
    if V is None:
        V = sum(k**i for i in range(1, d + 1))
    out = {"roughcost": 4.0 * V, "all_to_all": 4.0 * k**d}
    if geo is not None:
        out["geometric"] = 4.0 * geo.alpha * k * d ** (geo.D + 1)
    for name in list(out):
        out["log2_" + name] = out[name] * math.log2(n)
    return out


def classify_regime(kc: ScalingClass, dc: ScalingClass, geo: Optional[GeoParams] = None) -> str:
    """Efficiency regime for growth classes of gate size and depth."""
    const, loglog, polylog = (SCALING_TAGS.index(t) for t in ("constant", "loglog", "polylog"))
    k, d = kc.rank, dc.rank
    if k == const and d == const:
        return "polynomial"
    if (k <= polylog and d == const) or (k == const and d <= loglog) \
            or (geo is not None and k <= polylog and d <= polylog):
        return "quasi-polynomial"
    if k <= polylog and d <= loglog:
        return "quasi-quasi-polynomial"
    return "unclassified"


def log_circuit_count(n: int, k: int, d: int) -> float:
    """Heuristic log-number of depth-``d`` circuits of ``k``-qubit gates: ``n d (ln n + 4^k)``.

    A volume-counting estimate only; nothing ties it to actual unitary counts.
    """
    if min(n, k, d) < 1:
        raise ValueError("arguments must be positive")
    return n * d * (math.log(n) + 4.0**k)


def error_budget(cs: CircuitStructure, N: Number) -> float:
    """Diamond-norm budget ``4 sum 2^{2k} / sqrt(N)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return 4 * _weight(cs) / math.sqrt(N)


def comparison_costs(n: int, t_count: int, t_depth: int) -> dict[str, float]:
    """``log2`` costs of the T-count (``n 2^{k_t}``) and T-depth (``(68n)^{d_t}``) protocols."""
    if n < 1 or t_count < 0 or t_depth < 0:
        raise ValueError("invalid arguments")
    return {"t_count": math.log2(n) + t_count, "t_depth": t_depth * math.log2(68 * n)}


def whole_register_ports(n: int, target: Union[AccuracyTarget, float]) -> Fraction:
    """Port count ``16 * 2^{4n} / eps^2`` of the single-gate protocol on ``n`` qubits."""
    eps = _epsilon(target).exact
    return Fraction(16 * 2 ** (4 * n)) / eps**2


def whole_register_cost(n: int, target: Union[AccuracyTarget, float]) -> int:
    """Bell pairs for the single-gate protocol: ``2 n N`` with ``N`` rounded up."""
    return 2 * n * math.ceil(whole_register_ports(n, target))


def satisfies_v_ge_d(cs: CircuitStructure) -> bool:
    return lightcone_volume(cs) >= cs.depth


def cost_report(cs: CircuitStructure, N: Optional[int] = None,
                target: Union[AccuracyTarget, float, None] = None,
                geo: Optional[GeoParams] = None) -> CostReport:
    """Full report: exact E plus asymptotic exponents and, with a target, the log2 upper bound."""
    if (N is None) == (target is None):
        raise ValueError("give exactly one of N and target")
    if N is None:
        N = ports_required(cs, target)
    report = entanglement_cost(cs, N)
    ks = {g.k for g in cs.gates()}
    k = max(ks)
    V = lightcone_volume(cs)
    report.bounds.update(asymptotic_bounds(cs.n, k, cs.depth, geo, V=V))
    report.bounds["V"] = float(V)
    if target is not None:
        report.bounds["log2_cost_upper_bound"] = cost_upper_bound(cs.n, cs.depth, k, target, V)
    return report
