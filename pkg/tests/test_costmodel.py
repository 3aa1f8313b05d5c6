import math
from fractions import Fraction

import pytest
import sympy

from nlqc_lightcone import corpus
from nlqc_lightcone.circuit import CircuitStructure, family
from nlqc_lightcone.costmodel import (
    AccuracyTarget,
    GeoParams,
    ScalingClass,
    asymptotic_bounds,
    whole_register_cost,
    whole_register_ports,
    classify_regime,
    comparison_costs,
    cost_report,
    cost_upper_bound,
    entanglement_cost,
    error_budget,
    log_circuit_count,
    ports_required,
    ports_required_exact,
    satisfies_v_ge_d,
)


def one_gate(k):
    return corpus.single_gate(max(2, k), tuple(range(k)))


# values evaluated by hand from the stated formulas
def test_ports_required_hand_values():
    assert ports_required(one_gate(1), 2) == 64
    assert ports_required(one_gate(2), 0.1) == 409600
    two = CircuitStructure.build(2, [[((0,), None)], [((0,), None)]])
    assert ports_required(two, 2) == 256


def test_ports_required_is_minimal(rng):
    for _ in range(30):
        cs = corpus.random_circuit(5, 3, 2, rng, unitaries=False)
        eps = float(rng.choice([0.5, 1.0, 1.7, 2.0]))
        N = ports_required(cs, eps)
        assert error_budget(cs, N) <= eps
        if N > 1:
            assert error_budget(cs, N - 1) > eps or N - 1 < ports_required_exact(cs, eps)


def test_decimal_epsilon_reading():
    assert AccuracyTarget(0.1).exact == Fraction(1, 10)
    with pytest.raises(ValueError):
        AccuracyTarget(0)
    with pytest.raises(ValueError):
        AccuracyTarget(3)


def test_entanglement_cost_hand_values():
    assert entanglement_cost(corpus.depth_one(4, 2), 100).E == 800
    assert entanglement_cost(one_gate(1), 1).E == 2
    assert entanglement_cost(corpus.brickwork(8, 2), 3).E == 480


def test_entanglement_cost_symbolic_brickwork():
    # symbolic oracle: per-gate 2 k N^|fm| summed by sympy
    cs = corpus.brickwork(8, 2)
    N = sympy.Symbol("N", positive=True)
    E = sum(2 * g.k * N ** len(family(cs, g.id)) for g in cs.gates())
    assert sympy.expand(E - (16 * N + 16 * N**3)) == 0
    for n_val in (1, 2, 5, 10**6):
        assert entanglement_cost(cs, n_val).E == int(E.subs(N, n_val))


def test_entanglement_cost_big_ints_exact():
    cs = corpus.all_to_all_tree(3, 3)
    N = 10**9
    E = entanglement_cost(cs, N).E
    assert isinstance(E, int)
    assert E == sum(2 * 3 * N ** len(family(cs, g.id)) for g in cs.gates())
    # total weight of the top gate alone: N^13
    assert E > N**13


def test_report_includes_initial_pairs_separately():
    rep = entanglement_cost(one_gate(1), 64)
    assert rep.E == 128 and rep.initial_pairs == 1 and rep.total_with_initial == 129


def test_error_budget_hand_values():
    assert error_budget(one_gate(1), 64) == pytest.approx(2.0, abs=1e-12)
    assert error_budget(one_gate(1), 10**12) < 1e-4


def test_cost_upper_bound_hand_value():
    assert cost_upper_bound(4, 1, 2, 2, 2) == pytest.approx(15.0, abs=1e-12)


def test_cost_upper_bound_dominates_exact_cost(rng):
    for _ in range(20):
        k = int(rng.integers(1, 3))
        cs = corpus.random_uniform_circuit(6, int(rng.integers(1, 4)), k, rng)
        eps = 1.0
        exact_N = ports_required_exact(cs, eps)
        E = entanglement_cost(cs, exact_N).E
        bound = cost_upper_bound(cs.n, cs.depth, k, eps, max(len(family(cs, g.id)) for g in cs.gates()) * k)
        assert math.log2(E) <= bound + 1e-9


def test_asymptotic_exponents():
    b = asymptotic_bounds(16, 2, 3)
    assert b["all_to_all"] == 32
    assert b["roughcost"] == 4 * (2 + 4 + 8)
    g = asymptotic_bounds(16, 2, 3, GeoParams(1, 1.0))
    assert g["geometric"] == 72
    assert g["log2_geometric"] == pytest.approx(72 * 4)
    with pytest.raises(ValueError):
        asymptotic_bounds(16, 2, 0)


@pytest.mark.parametrize("kc,dc,geo,expected", [
    ("constant", "constant", None, "polynomial"),
    ("polylog", "polylog", GeoParams(2), "quasi-polynomial"),
    ("polylog", "loglog", None, "quasi-quasi-polynomial"),
    ("constant", "loglog", None, "quasi-polynomial"),
    ("polylog", "constant", None, "quasi-polynomial"),
    ("poly", "constant", None, "unclassified"),
    ("constant", "poly", GeoParams(1), "unclassified"),
])
def test_classify_regime(kc, dc, geo, expected):
    assert classify_regime(ScalingClass(kc), ScalingClass(dc), geo) == expected


def test_log_circuit_count():
    assert log_circuit_count(math.e, 1, 1) == pytest.approx(math.e * 5, abs=1e-12)
    assert log_circuit_count(1, 2, 3) == pytest.approx(3 * 16)


def test_comparison_costs():
    c = comparison_costs(4, 0, 0)
    assert c["t_count"] == pytest.approx(2.0) and c["t_depth"] == 0.0
    # T-count n^2 at n=64 exceeds n^{log n}-type cost of the factorized fixture
    n = 64
    assert comparison_costs(n, n * n, 0)["t_count"] > math.log2(n) ** 2


def test_whole_register():
    assert whole_register_ports(4, 2) == 262144
    assert whole_register_ports(1, 0.1) == Fraction(16 * 16 * 100)
    assert whole_register_cost(4, 2) == 2 * 4 * 262144


def _log_ratio(n, two_layer):
    cs = corpus.factorized_blocks(n, two_layer=two_layer)
    ours = entanglement_cost(cs, ports_required(cs, 1.0)).E
    return math.log2(ours) / math.log2(whole_register_cost(n, 1.0))


def test_factorized_blocks_beat_single_gate():
    ratios = [_log_ratio(n, False) for n in (8, 16, 32, 64, 256)]
    assert all(r < 1 for r in ratios)
    assert ratios == sorted(ratios, reverse=True)
    # the straddling second layer costs more; it wins once n is large enough
    assert _log_ratio(8, True) > 1
    assert all(_log_ratio(n, True) < 1 for n in (32, 64, 256))


def test_v_ge_d_predicate():
    assert satisfies_v_ge_d(corpus.brickwork(8, 3))
    assert satisfies_v_ge_d(corpus.all_to_all_tree(2, 3))


def test_cost_report_round_trip_json():
    import json
    rep = cost_report(corpus.brickwork(8, 2), target=1.0, geo=GeoParams(1, 1.0))
    d = json.loads(rep.to_json())
    assert d["E"] == rep.E and "log2_cost_upper_bound" in d["bounds"] and "geometric" in d["bounds"]
    assert "N" in rep.to_table()
    with pytest.raises(ValueError):
        cost_report(corpus.brickwork(8, 2), N=3, target=1.0)
