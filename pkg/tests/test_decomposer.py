from __future__ import annotations

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from oracles import (
    decomposition_cost,
    edge_penalty_cost,
    exhaustive_constrained,
    exhaustive_min_cost,
    placement_cost,
)
from nocsynth.decomposer import (
    Constraints,
    Decomposition,
    Infeasible,
    check_bandwidth,
    check_constraints,
    decompose,
    format_listing,
    lower_bound,
    match_charges,
    match_cost,
    remainder_cost,
    route_conflicts,
    routed_paths,
)
from nocsynth.energy import CALIBRATED, EnergyModel
from nocsynth.graph import Acg, Edge
from nocsynth.isomorphism import enumerate_matches
from nocsynth.library import builtin_library
from nocsynth.synthesizer import Architecture, Link
from nocsynth.decomposer import bisection_bandwidth
from nocsynth.simulator import mesh_baseline
from nocsynth.workloads import AES_ROW3, aes_acg, planted_workload, random_acg

LIB = builtin_library()
UNIT2 = EnergyModel.unit(2.0)


def clique(nodes, volume=1, bandwidth=1, positions=None):
    pos = positions or {n: None for n in nodes}
    return Acg(pos, [(a, b, volume, bandwidth) for a in nodes for b in nodes if a != b])


def only_match(g, name):
    return enumerate_matches(g, LIB.by_name(name))[0]


# -- costs ----------------------------------------------------------------------

def test_mgg4_clique_cost_both_modes():
    g = clique([1, 2, 3, 4])
    m = only_match(g, "MGG4")
    p = LIB.by_name("MGG4")
    # every ring link carries at most one unit at a time
    assert match_cost(m, g, UNIT2) == 4 == placement_cost(g, p, m.mapping)
    # eight one-hop pairs plus four two-hop pairs
    assert match_cost(m, g, UNIT2, mode="flow") == 16 == placement_cost(g, p, m.mapping, flow=True)


def test_l4_cycle_cost():
    g = Acg({i: None for i in range(1, 5)}, [(i, i % 4 + 1, 1, 1) for i in range(1, 5)])
    m = only_match(g, "L4")
    assert match_cost(m, g, UNIT2) == 4
    assert match_cost(m, g, UNIT2, mode="flow") == 4


def test_zero_volume_cost():
    g = clique([1, 2, 3, 4], volume=0)
    assert match_cost(only_match(g, "MGG4"), g, CALIBRATED) == 0


def test_invalid_match_and_mode():
    g = clique([1, 2, 3, 4])
    m = only_match(g, "MGG4")
    with pytest.raises(ValueError):
        match_cost(m, g, UNIT2, mode="bits")
    with pytest.raises(ValueError):
        match_cost(m, Acg({i: None for i in range(1, 5)}), UNIT2)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 3000), name=st.sampled_from(["MGG4", "G123", "G124", "L5", "P4"]))
def test_match_cost_matches_oracle(seed, name):
    g = planted_workload(seed, 9, [name], noise=0.3, volume=3).acg
    p = LIB.by_name(name)
    for m in enumerate_matches(g, p, variants=True):
        for mode in ("link", "flow"):
            want = placement_cost(g, p, m.mapping, CALIBRATED.e_router, CALIBRATED.e_wire, mode == "flow")
            assert match_cost(m, g, CALIBRATED, mode=mode) == pytest.approx(want)
        charges = match_charges(m, g, CALIBRATED)
        assert sum(charges.values()) == pytest.approx(match_cost(m, g, CALIBRATED))
        assert set(charges) == set(m.covered)


def test_remainder_cost():
    g = Acg({1: None, 2: None}, [(1, 2, 3, 1)])
    assert remainder_cost([], g, UNIT2) == 0
    assert remainder_cost([(1, 2)], g, UNIT2) == 6
    aes = aes_acg(volume=1)
    assert remainder_cost(AES_ROW3, aes, UNIT2) == 8


def test_lower_bound_examples():
    g = random_acg(3, 6, 0.5)
    assert lower_bound([], g, UNIT2) == 0
    five = sorted(g.edge_set)[:5]
    assert lower_bound(five, g, UNIT2) == 5


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 5000), n=st.integers(4, 6))
def test_lower_bound_is_admissible(seed, n):
    g = random_acg(seed, n, 0.45)
    assume(g.number_of_edges() <= 14)
    edges = g.edge_set
    matches = [m for p in LIB for m in enumerate_matches(g, p)]
    opt = exhaustive_min_cost(g, LIB, lam=2.0)
    for lb in (lower_bound(edges, g, UNIT2), lower_bound(edges, g, UNIT2, matches, LIB),
               lower_bound(edges, g, UNIT2, matches, LIB, include_penalty=True)):
        assert lb <= remainder_cost(edges, g, UNIT2) + 1e-9
        assert lb <= opt + 1e-9


# -- search ---------------------------------------------------------------------

def test_single_clique():
    g = clique([1, 2, 3, 4])
    d = decompose(g, LIB, UNIT2)
    assert [m.primitive_id for m in d.matches] == [1] and d.remainder == ()
    assert d.cost == 4
    flow = decompose(g, LIB, UNIT2, mode="flow")
    # summed volumes make MGG4 (16) dearer than direct-routed smaller primitives
    assert flow.cost == exhaustive_min_cost(g, LIB, 2.0, flow=True) < 16
    assert remainder_cost(g.edge_set, g, UNIT2) == 24


def test_empty_graph():
    d = decompose(Acg(), LIB, UNIT2)
    assert d.matches == () and d.remainder == () and d.cost == 0


def test_aes_structure_and_cost():
    g = aes_acg()
    d = decompose(g, LIB, UNIT2)
    assert sorted(LIB.by_id(m.primitive_id).name for m in d.matches) == ["L4", "L4"] + ["MGG4"] * 4
    assert set(d.remainder) == set(AES_ROW3)
    assert d.cost == decomposition_cost(g, LIB, d.matches, d.remainder, lam=2.0)
    # unit volumes with a penalty of one reproduce the published figure
    assert decompose(aes_acg(volume=1), LIB, EnergyModel.unit(1.0)).cost == 28


def _small(seed):
    # full enumeration and the oracle are exponential; stay at or under 14 edges
    for s in range(seed * 50, seed * 50 + 50):
        g = random_acg(s, 4 + s % 3, 0.5)
        if 6 <= g.number_of_edges() <= 14:
            return g
    raise AssertionError("no small instance")


@pytest.mark.parametrize("seed", range(10))
def test_pruning_never_changes_result(seed):
    g = _small(seed)
    a = decompose(g, LIB, UNIT2)
    b = decompose(g, LIB, UNIT2, prune=False)
    assert a == b


@pytest.mark.parametrize("seed", range(6))
def test_flow_mode_optimal(seed):
    g = _small(seed + 100)
    assert decompose(g, LIB, UNIT2, mode="flow").cost == exhaustive_min_cost(g, LIB, 2.0, flow=True)


def test_calibrated_costs_optimal():
    for seed in range(8):
        g = planted_workload(seed, 7, ["L4"], noise=0.6).acg
        got = decompose(g, LIB, CALIBRATED).cost
        assert got == pytest.approx(exhaustive_min_cost(g, LIB, 2.0, CALIBRATED.e_router, CALIBRATED.e_wire))


def test_workers_do_not_change_result():
    g = planted_workload(4, 16, ["MGG4", "L4", "P3", "G123"], noise=0.2, overlap=False).acg
    assert decompose(g, LIB, UNIT2) == decompose(g, LIB, UNIT2, workers=2)


def test_tie_break_is_smallest_key():
    # two disjoint equal-cost ways to cover a 3-cycle plus chord structure
    g = planted_workload(2, 8, ["L3", "L3"]).acg
    d = decompose(g, LIB, UNIT2)
    full = decompose(g, LIB, UNIT2, prune=False)
    assert d.key == full.key
    assert list(d.matches) == sorted(d.matches, key=lambda m: m.key)


def test_max_depth_and_on_leaf():
    g = aes_acg()
    k4 = clique([1, 2, 3, 4])
    seen = []

    def leaf(matches, rem):
        covered = [e for m in matches for e in m.covered]
        assert len(covered) == len(set(covered))
        assert set(covered) | set(rem) == set(k4.edge_set) and not set(covered) & set(rem)
        seen.append(len(matches))

    d = decompose(g, LIB, UNIT2, max_depth=0)
    assert d.matches == () and len(d.remainder) == 60
    d = decompose(k4, LIB, UNIT2, on_leaf=leaf)
    assert seen and d.cost == 4


def test_truncation_flag():
    g = random_acg(1, 12, 0.6)
    assert decompose(g, LIB, UNIT2, timeout=0.0).truncated


def test_listing_format():
    g = clique([1, 2, 5, 6])
    d = decompose(g, LIB, UNIT2)
    assert format_listing(d, LIB) == "COST: 4\n1: MGG4, Mapping: (1 1), (2 2), (3 5), (4 6)\n0: Remaining Graph:\n"
    r = Decomposition((), ((9, 11),), 2)
    assert format_listing(r, LIB, with_cost=False) == "0: Remaining Graph:\nedge 9 11\n"


# -- constraints ----------------------------------------------------------------

def test_check_bandwidth_shared_link():
    g = Acg({i: None for i in range(1, 5)}, [Edge(a, b, 1, 60) for a in range(1, 5) for b in range(1, 5) if a != b])
    m = only_match(g, "MGG4")
    d = Decomposition((m,), (), 0)
    assert check_bandwidth(d, g, Constraints()) == []
    v = check_bandwidth(d, g, Constraints(max_link_bandwidth=100))
    assert ("link", (1, 3), 120.0, 100) in [tuple(x) for x in v]


def test_aes_bandwidth_fits():
    g = aes_acg()
    d = decompose(g, LIB, UNIT2)
    assert check_bandwidth(d, g, Constraints(max_link_bandwidth=10)) == []


def test_bisection_examples():
    two = Architecture({1: None, 2: None}, {(1, 2): Link(1, 2, 5.0, 1.0)})
    assert bisection_bandwidth(two).bandwidth == 5
    ring = Architecture({i: None for i in range(1, 5)},
                        {(a, b): Link(a, b, 1.0, 1.0) for a, b in [(1, 2), (2, 3), (3, 4), (1, 4)]})
    assert bisection_bandwidth(ring).bandwidth == 2
    mesh, _ = mesh_baseline(4, 4)
    cut = bisection_bandwidth(mesh)
    assert cut.bandwidth == 4 and cut.exact


def test_tight_constraint_is_infeasible():
    g = aes_acg()
    with pytest.raises(Infeasible) as exc:
        decompose(g, LIB, UNIT2, Constraints(max_bisection_bandwidth=1))
    assert exc.value.violations and exc.value.violations[0].kind == "bisection"
    with pytest.raises(Infeasible):
        decompose(Acg({1: None, 2: None}, [(1, 2, 1, 5)]), LIB, UNIT2, Constraints(max_link_bandwidth=4))


def test_constrained_result_satisfies_constraints():
    g = aes_acg()
    c = Constraints(max_bisection_bandwidth=8, max_link_bandwidth=2)
    d = decompose(g, LIB, UNIT2, c)
    assert check_constraints(d, g, c, LIB) == []
    assert route_conflicts(routed_paths(d, g, LIB)) == []


def _capped_instance(seed):
    import numpy as np

    rng = np.random.default_rng(seed)
    for s in range(seed * 40, seed * 40 + 40):
        base = random_acg(s, 4 + s % 3, 0.55)
        if base.number_of_edges() <= 13:
            break
    g = Acg(base.positions, [Edge(e.src, e.dst, 1, float(rng.integers(1, 3))) for e in base.edges])
    return g, float(rng.integers(2, 4))


@pytest.mark.parametrize("seed", range(15))
def test_constrained_matches_oracle(seed):
    g, cap = _capped_instance(seed)
    want = exhaustive_constrained(g, LIB, 2.0, cap)
    try:
        got = decompose(g, LIB, UNIT2, Constraints(max_link_bandwidth=cap))
    except Infeasible:
        assert want is None
        return
    assert want is not None and got.cost == want[0]


def test_constraints_validation():
    with pytest.raises(ValueError):
        Constraints(max_link_bandwidth=0)
    assert Constraints().unlimited and not Constraints(max_bisection_bandwidth=3).unlimited
    assert math.isinf(Constraints().max_link_bandwidth)


def test_edge_penalty_oracle_agrees():
    g = planted_workload(1, 9, ["L4"], noise=0.5).acg
    for e in g.edge_set:
        assert remainder_cost([e], g, CALIBRATED) == pytest.approx(
            edge_penalty_cost(g, e, 2.0, CALIBRATED.e_router, CALIBRATED.e_wire))


@pytest.mark.parametrize("depth", [1, 2, 3])
def test_max_depth_caps_matches(depth):
    g = planted_workload(3, 12, ["MGG4", "L4", "L4"], noise=0.1, overlap=False).acg
    d = decompose(g, LIB, UNIT2, max_depth=depth)
    assert len(d.matches) == depth
    assert d.cost == decomposition_cost(g, LIB, d.matches, d.remainder, lam=2.0)
