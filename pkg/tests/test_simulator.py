from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_simple_cycles
from nocsynth.energy import CALIBRATED, EnergyModel
from nocsynth.simulator import (
    CSV_HEADER,
    SimConfig,
    Traffic,
    energy_per_block,
    mesh_baseline,
    simulate,
    throughput,
)
from nocsynth.synthesizer import (
    ArchError,
    Architecture,
    Link,
    RoutingTables,
    channel_dependency_graph,
    detect_deadlock,
)
from nocsynth.workloads import traffic_from_acg
from nocsynth.graph import Acg


def line(n, length=1.0):
    a = Architecture({i: None for i in range(1, n + 1)},
                     {(i, i + 1): Link(i, i + 1, 1.0, length) for i in range(1, n)})
    nh = {i: {j: (i + 1 if j > i else i - 1) for j in range(1, n + 1) if j != i} for i in range(1, n + 1)}
    return a, RoutingTables(nh)


def test_single_hop():
    a, t = line(2)
    r = simulate(a, t, Traffic.trace([(0, 1, 2, 32)]))
    assert (r.delta_cycles, r.avg_latency_cycles, r.max_latency_cycles) == (1, 1.0, 1)
    assert r.delivered_packets == r.injected_packets == 1


def test_contention_latencies():
    a, t = line(2)
    r = simulate(a, t, Traffic.trace([(0, 1, 2, 32), (0, 1, 2, 32)]))
    assert r.max_latency_cycles == 2 and r.avg_latency_cycles == 1.5 and r.delta_cycles == 2


@pytest.mark.parametrize("switching", ["store-and-forward", "cut-through"])
@pytest.mark.parametrize("flits,hops", [(1, 1), (2, 1), (2, 2), (3, 3), (4, 2)])
def test_uncontended_latency(switching, flits, hops):
    a, t = line(hops + 1)
    r = simulate(a, t, Traffic.trace([(0, 1, hops + 1, 32 * flits)]), SimConfig(switching=switching))
    want = hops * flits if switching == "store-and-forward" else flits + hops - 1
    assert r.max_latency_cycles == want
    assert r.flit_hops == flits * hops


def test_throughput_examples():
    assert throughput(271, 100e6, 128) / 1e6 == pytest.approx(47.2, abs=0.05)
    assert throughput(199, 100e6, 128) / 1e6 == pytest.approx(64.3, abs=0.05)
    assert throughput(128, 1, 128) == 1
    with pytest.raises(ValueError):
        throughput(0, 100e6)


def test_energy_per_block():
    p = 5.1e-6 / (271 / 100e6)
    assert p == pytest.approx(1.882, abs=5e-4)
    assert energy_per_block(271, 100e6, p) == pytest.approx(5.1e-6)
    with pytest.raises(ValueError):
        energy_per_block(0, 100e6, 1.0)


def test_energy_accounting():
    a, t = line(3, length=2.0)
    r = simulate(a, t, Traffic.trace([(0, 1, 3, 64)]), em=CALIBRATED)
    # two flits over two hops at (1 + 0.05 * 2) pJ/bit
    assert r.energy_joules == pytest.approx(4 * 32 * 1.1e-12)
    assert energy_per_block(r.delta_cycles, 100e6, r.p_ave_watts) == pytest.approx(r.energy_joules)


def test_energy_doubles_with_volume():
    arch, t = mesh_baseline(3, 3)
    pairs = [(1, 9, 32), (4, 6, 32), (7, 3, 64)]
    cfg = SimConfig(buffer_depth=8)
    one = simulate(arch, t, Traffic.trace([(0, s, d, b) for s, d, b in pairs]), cfg, CALIBRATED)
    two = simulate(arch, t, Traffic.trace([(0, s, d, 2 * b) for s, d, b in pairs]), cfg, CALIBRATED)
    assert two.energy_joules == pytest.approx(2 * one.energy_joules)


def test_mesh_shapes():
    a, t = mesh_baseline(1, 2)
    assert list(a.links) == [(1, 2)] and t.next_hop == {1: {2: 2}, 2: {1: 1}}
    a, t = mesh_baseline(4, 4)
    assert len(a.links) == 24
    assert t.walk(1, 16) == [1, 2, 3, 4, 8, 12, 16]
    assert t.walk(16, 1) == [16, 15, 14, 13, 9, 5, 1]
    cdg = channel_dependency_graph(a, t)
    assert detect_deadlock(a, t) == [] == brute_simple_cycles(list(cdg.nodes), list(cdg.edges))
    with pytest.raises(ValueError):
        mesh_baseline(1, 1)


def test_two_node_mesh_equals_custom_link():
    mesh = mesh_baseline(1, 2)
    custom = line(2)
    tr = Traffic.trace([(0, 1, 2, 96), (1, 2, 1, 32), (3, 1, 2, 32)])
    assert simulate(*mesh, tr, em=CALIBRATED) == simulate(*custom, tr, em=CALIBRATED)


def _ring(n=4):
    a = Architecture({i: None for i in range(1, n + 1)},
                     {tuple(sorted((i, i % n + 1))): Link(*sorted((i, i % n + 1)), 1.0, 1.0) for i in range(1, n + 1)})
    nh = {}
    for i in range(1, n + 1):
        nxt = i % n + 1
        nh[i] = {nxt: nxt, nxt % n + 1: nxt}
    return a, RoutingTables(nh)


def test_cyclic_routing_needs_virtual_channels():
    a, t = _ring()
    tr = Traffic.trace([(0, i, (i + 1) % 4 + 1, 32) for i in range(1, 5)])
    with pytest.raises(ArchError):
        simulate(a, t, tr)
    r = simulate(a, t, tr, SimConfig(virtual_channels=2))
    assert r.delivered_packets == 4


def test_oversized_packet_rejected():
    a, t = line(3)
    with pytest.raises(ValueError):
        simulate(a, t, Traffic.trace([(0, 1, 3, 32 * 5)]))


def test_traffic_validation():
    a, t = line(2)
    with pytest.raises(ValueError):
        simulate(a, t, Traffic.trace([(0, 1, 1, 32)]))
    with pytest.raises(ValueError):
        simulate(a, t, Traffic.trace([(0, 1, 7, 32)]))
    with pytest.raises(ValueError):
        SimConfig(flit_bits=0)
    with pytest.raises(ValueError):
        SimConfig(switching="wormhole")


def test_poisson_determinism():
    arch, t = mesh_baseline(3, 3)
    pairs = [(1, 9, 32), (3, 7, 64), (5, 2, 32)]
    a = Traffic.poisson(pairs, 0.05, 400, seed=3)
    b = Traffic.poisson(pairs, 0.05, 400, seed=3)
    assert a == b and len(a) > 0
    assert a != Traffic.poisson(pairs, 0.05, 400, seed=4)
    ra, rb = simulate(arch, t, a), simulate(arch, t, b)
    assert ra == rb and ra.delivered_packets == len(a)


def test_acg_rounds_are_barrier_separated():
    g = Acg({1: None, 2: None, 3: None}, [(1, 2, 32, 1), (2, 3, 32, 1)])
    a, t = line(3)
    one = simulate(a, t, traffic_from_acg(g, 1))
    three = simulate(a, t, traffic_from_acg(g, 3))
    assert three.delta_cycles == 3 * one.delta_cycles
    assert three.delivered_packets == 6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), switching=st.sampled_from(["store-and-forward", "cut-through"]))
def test_conservation_and_latency_floor(seed, switching):
    arch, t = mesh_baseline(3, 4)
    rng = np.random.default_rng(seed)
    events = []
    for _ in range(int(rng.integers(1, 25))):
        s, d = rng.choice(12, 2, replace=False) + 1
        events.append((int(rng.integers(0, 10)), int(s), int(d), 32 * int(rng.integers(1, 4))))
    tr = Traffic.trace(events)
    r = simulate(arch, t, tr, SimConfig(switching=switching))
    assert r.delivered_packets == r.injected_packets == len(events)
    floor = min(len(t.walk(s, d)) - 1 + math.ceil(b / 32) - 1 for _, s, d, b in events)
    assert r.max_latency_cycles >= floor
    assert r.avg_latency_cycles >= min(len(t.walk(s, d)) - 1 for _, s, d, _ in events)


def test_csv_row():
    a, t = line(2)
    r = simulate(a, t, Traffic.trace([(0, 1, 2, 32)]), em=EnergyModel.unit())
    row = r.csv_row("x", "mesh", 100e6, 128)
    assert len(row.split(",")) == len(CSV_HEADER.split(","))
    assert row.startswith("x,mesh,1,1,1.28e+10,")
