"""Cycle-level flit simulator for synthesized architectures and mesh baselines.

Every directed link carries at most one flit per cycle and a flit sent in
cycle ``c`` is at the next router in cycle ``c + 1``.  Routers have one
input port per incoming link plus a local injection port (port 0), each
with ``virtual_channels`` single-packet buffers.  An output is held by one
packet from its head to its tail flit and granted round robin over
(input port, VC) with the pointer starting at the lowest port.  An input
port forwards at most one flit per cycle.  Destinations sink flits at once.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .energy import EnergyModel, e_bit
from .synthesizer import (
    Architecture,
    ArchError,
    Link,
    RoutingTables,
    detect_deadlock,
    has_dependency_cycle,
    min_virtual_channels,
    vc_classes,
)

SWITCHING = ("store-and-forward", "cut-through")
CSV_HEADER = "scenario,arch,delta_cycles,avg_latency,throughput_bps,energy_j,p_ave_w"


class Packet(NamedTuple):
    id: int
    phase: int
    src: int
    dst: int
    bits: float
    offset: int = 0  # injection cycle relative to the start of its phase


@dataclass(frozen=True)
class Traffic:
    packets: tuple
    mode: str = "trace"

    def __len__(self) -> int:
        return len(self.packets)

    @property
    def phases(self) -> int:
        return 1 + max((p.phase for p in self.packets), default=-1)

    @classmethod
    def trace(cls, events: Iterable[tuple]) -> "Traffic":
        """Events are ``(cycle, src, dst, bits)``."""
        pk = tuple(Packet(i, 0, int(s), int(d), float(b), int(c))
                   for i, (c, s, d, b) in enumerate(sorted(events, key=lambda e: (e[0], e[1], e[2]))))
        return cls(pk, "trace")

    @classmethod
    def poisson(cls, pairs: Sequence[tuple], rate: float, cycles: int, seed: int) -> "Traffic":
        """Each ``(src, dst, bits)`` pair injects with exponential gaps of mean ``1/rate`` cycles."""
        if rate <= 0:
            raise ValueError("rate must be positive")
        rng = np.random.default_rng(seed)
        events = []
        for s, d, b in sorted(pairs):
            t = rng.exponential(1.0 / rate)
            while t < cycles:
                events.append((int(t), s, d, b))
                t += rng.exponential(1.0 / rate)
        return cls(cls.trace(events).packets, "poisson")

    def validate(self, nodes: Iterable[int]) -> None:
        nodes = set(nodes)
        for p in self.packets:
            if p.src == p.dst:
                raise ValueError(f"packet {p.id} has src == dst")
            if p.src not in nodes or p.dst not in nodes:
                raise ValueError(f"packet {p.id} references an unknown node")
            if p.bits < 0 or p.offset < 0:
                raise ValueError(f"packet {p.id} has negative size or time")


@dataclass(frozen=True)
class SimConfig:
    flit_bits: int = 32
    buffer_depth: int = 4  # flits per virtual channel
    virtual_channels: int = 1
    f_clk: float = 100e6
    switching: str = "store-and-forward"
    node_delay: int = 0  # cycles between the end of one phase and the next

    def __post_init__(self):
        if self.flit_bits <= 0 or self.buffer_depth <= 0 or self.virtual_channels < 1:
            raise ValueError("flit_bits, buffer_depth and virtual_channels must be positive")
        if self.f_clk <= 0 or self.node_delay < 0:
            raise ValueError("f_clk must be positive and node_delay non-negative")
        if self.switching not in SWITCHING:
            raise ValueError(f"switching must be one of {SWITCHING}")


@dataclass(frozen=True)
class SimResult:
    delta_cycles: int
    avg_latency_cycles: float
    max_latency_cycles: int
    injected_packets: int
    delivered_packets: int
    flit_hops: int
    energy_joules: float
    p_ave_watts: float

    def csv_row(self, scenario: str, arch: str, f_clk: float, block_bits: float) -> str:
        rho = throughput(self.delta_cycles, f_clk, block_bits) if self.delta_cycles else 0.0
        return (f"{scenario},{arch},{self.delta_cycles},{self.avg_latency_cycles:.6g},"
                f"{rho:.6g},{self.energy_joules:.6g},{self.p_ave_watts:.6g}")

    def as_dict(self) -> dict:
        return asdict(self)


class DeadlockError(RuntimeError):
    def __init__(self, cycle: int, blocked: list, cdg_cycles: list):
        self.cycle = cycle
        self.blocked = blocked
        self.cdg_cycles = cdg_cycles
        super().__init__(f"no progress at cycle {cycle}; blocked packets {blocked}; "
                         f"{len(cdg_cycles)} channel dependency cycle(s)")


def throughput(delta_cycles: float, f_clk: float, block_bits: float = 128) -> float:
    if delta_cycles <= 0:
        raise ValueError("delta must be positive")
    return block_bits * f_clk / delta_cycles


def energy_per_block(delta_cycles: float, f_clk: float, p_ave: float) -> float:
    if delta_cycles <= 0 or f_clk <= 0:
        raise ValueError("delta and f_clk must be positive")
    return delta_cycles / f_clk * p_ave


class _Flight:
    """Mutable state of one packet; it may occupy buffers at several routers at once."""

    __slots__ = ("pkt", "path", "cls", "flits", "inject", "sent", "last", "port", "vc", "granted")

    def __init__(self, pkt: Packet, path, cls, flits: int, inject: int):
        hops = len(path) - 1
        self.pkt = pkt
        self.path = path
        self.cls = cls
        self.flits = flits
        self.inject = inject
        self.sent = [0] * hops  # flits sent over each hop
        self.last = [-1] * hops  # cycle of the latest send per hop
        self.granted = [False] * hops
        self.port = [0] * hops  # input buffer held at router j
        self.vc = [0] * hops

    def received(self, j: int, c: int) -> int:
        """Flits that have reached router j by cycle c."""
        if j == 0:
            return self.flits
        return self.sent[j - 1] - (self.last[j - 1] == c)


def simulate(a: Architecture, t: RoutingTables, tr: Traffic, cfg: SimConfig = SimConfig(),
             em: Optional[EnergyModel] = None, max_cycles: int = 10_000_000) -> SimResult:
    em = em or EnergyModel.unit()
    tr.validate(a.nodes)
    V = cfg.virtual_channels
    cyclic = has_dependency_cycle(a, t) if tr.packets else False
    classes = {}
    if cyclic:
        need = min_virtual_channels(a, t)
        if V < need:
            raise ArchError(f"routing has channel dependency cycles; needs {need} virtual channels, got {V}")
        classes = vc_classes(a, t)

    # input ports: 0 is local, then one per upstream neighbour in id order
    ports = {n: {u: i + 1 for i, u in enumerate(a.neighbours(n))} for n in a.nodes}
    n_ports = {n: len(p) + 1 for n, p in ports.items()}
    outputs = sorted([(x, y) for x, y in a.links] + [(y, x) for x, y in a.links])
    out_of = {n: [o for o in outputs if o[0] == n] for n in a.nodes}
    link_e = {}
    for o in outputs:
        lk: Link = a.links[(min(o), max(o))]
        link_e[o] = e_bit(em, lk.length_mm) * cfg.flit_bits * 1e-12

    phases: dict[int, list] = {}
    for p in tr.packets:
        phases.setdefault(p.phase, []).append(p)

    flit_hops = 0
    energy_terms = []
    latencies = []
    first_inject = None
    last_delivery = 0
    delivered = 0
    start = 0
    for ph in sorted(phases):
        pkts = sorted(phases[ph], key=lambda p: (p.offset, p.id))
        flights = []
        for p in pkts:
            path = t.walk(p.src, p.dst)
            flits = max(1, math.ceil(p.bits / cfg.flit_bits))
            if flits > cfg.buffer_depth and len(path) > 2:
                raise ValueError(f"packet {p.id} has {flits} flits but buffers hold {cfg.buffer_depth}")
            flights.append(_Flight(p, path, classes.get((p.src, p.dst)), flits, start + p.offset))
        res = _run_phase(flights, ports, n_ports, out_of, link_e, cfg, V, max_cycles, a, t)
        for f, done in res:
            latencies.append(done - f.inject)
            last_delivery = max(last_delivery, done)
            flit_hops += f.flits * (len(f.path) - 1)
            energy_terms += [link_e[(u, v)] * f.flits for u, v in zip(f.path, f.path[1:])]
            delivered += 1
        if flights:
            fi = min(f.inject for f in flights)
            first_inject = fi if first_inject is None else min(first_inject, fi)
            start = last_delivery + cfg.node_delay

    delta = last_delivery - first_inject if first_inject is not None else 0
    energy = math.fsum(energy_terms)
    return SimResult(
        delta_cycles=int(delta),
        avg_latency_cycles=float(np.mean(latencies)) if latencies else 0.0,
        max_latency_cycles=int(max(latencies, default=0)),
        injected_packets=len(tr.packets),
        delivered_packets=delivered,
        flit_hops=flit_hops,
        energy_joules=energy,
        p_ave_watts=energy / (delta / cfg.f_clk) if delta else 0.0,
    )


def _run_phase(flights, ports, n_ports, out_of, link_e, cfg, V, max_cycles, a, t):
    cut = cfg.switching == "cut-through"
    pending = deque(sorted(flights, key=lambda f: (f.inject, f.pkt.id)))
    queue = {n: deque() for n in ports}  # local injection FIFO
    # vc_free[n][port][vc] = first cycle the buffer may take a new packet
    vc_free = {n: [[0] * V for _ in range(n_ports[n])] for n in ports}
    resident = {n: [] for n in ports}  # (flight, index of n on its path)
    lock = {}  # output channel -> (flight, hop)
    out_free = {o: 0 for n in out_of for o in out_of[n]}
    rr = {o: 0 for o in out_free}
    done = []
    active = 0
    c = pending[0].inject if pending else 0
    while pending or active:
        if c > max_cycles:
            raise RuntimeError(f"simulation exceeded {max_cycles} cycles")
        while pending and pending[0].inject <= c:
            f = pending.popleft()
            queue[f.pkt.src].append(f)
            active += 1
        for n, q in queue.items():
            slots = vc_free[n][0]
            while q:
                vc = next((k for k in range(V) if slots[k] <= c), None)
                if vc is None:
                    break
                f = q.popleft()
                f.port[0], f.vc[0] = 0, vc
                slots[vc] = math.inf
                resident[n].append((f, 0))
        used = set()
        moved = False
        for n in sorted(out_of):
            for o in out_of[n]:
                held = lock.get(o)
                if held is None:
                    if out_free[o] > c:
                        continue
                    held = _arbitrate(o, resident, used, vc_free, ports, n_ports, rr, c, cut, V)
                    if held is None:
                        continue
                    lock[o] = held
                f, j = held
                port = f.port[j]
                if (n, port) in used or f.received(j, c) <= f.sent[j]:
                    continue
                used.add((n, port))
                f.sent[j] += 1
                f.last[j] = c
                moved = True
                if f.sent[j] == f.flits:
                    del lock[o]
                    out_free[o] = c + 1
                    resident[n].remove((f, j))
                    vc_free[n][port][f.vc[j]] = c + 1
                    if j + 1 == len(f.path) - 1:
                        done.append((f, c + 1))
                        active -= 1
        if not moved:
            if active:
                blocked = sorted((f.pkt.id, f.path[j]) for n in resident for f, j in resident[n])
                blocked += sorted((f.pkt.id, n) for n in queue for f in queue[n])
                raise DeadlockError(c, blocked, detect_deadlock(a, t))
            if pending:
                c = pending[0].inject
                continue
        c += 1
    return done


def _arbitrate(o, resident, used, vc_free, ports, n_ports, rr, c, cut, V):
    """Grant output ``o`` round robin over (input port, VC) among ready packets."""
    n, v = o
    span = n_ports[n] * V
    best = None
    for f, j in resident[n]:
        if f.granted[j] or f.path[j + 1] != v or (n, f.port[j]) in used:
            continue
        if f.received(j, c) < (1 if cut else f.flits):
            continue
        key = f.port[j] * V + f.vc[j]
        rank = (key - rr[o]) % span
        if best is not None and rank >= best[0]:
            continue
        down = None
        if j + 1 < len(f.path) - 1:
            slots = vc_free[v][ports[v][n]]
            if f.cls is not None:
                k = f.cls[j]
                down = k if slots[k] <= c else None
            else:
                down = next((k for k in range(V) if slots[k] <= c), None)
            if down is None:
                continue
        best = (rank, key, f, j, down)
    if best is None:
        return None
    _, key, f, j, down = best
    rr[o] = (key + 1) % span
    f.granted[j] = True
    if down is not None:
        port = ports[v][n]
        vc_free[v][port][down] = math.inf
        f.port[j + 1], f.vc[j + 1] = port, down
        resident[v].append((f, j + 1))
    return f, j


def mesh_baseline(rows: int, cols: int, spacing_mm: float = 1.0, capacity: float = 1.0) -> tuple[Architecture, RoutingTables]:
    """Grid with dimension-ordered routing: columns are corrected first, then rows."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("mesh needs at least two nodes")
    nid = lambda r, c: r * cols + c + 1  # noqa: E731
    positions = {nid(r, c): (c * spacing_mm, r * spacing_mm) for r in range(rows) for c in range(cols)}
    links = {}
    for r in range(rows):
        for c in range(cols):
            for r2, c2 in ((r, c + 1), (r + 1, c)):
                if r2 < rows and c2 < cols:
                    x, y = nid(r, c), nid(r2, c2)
                    links[(x, y)] = Link(x, y, capacity, spacing_mm, ("mesh",), 0.0)
    tables: dict[int, dict[int, int]] = {}
    for r in range(rows):
        for c in range(cols):
            tb = tables.setdefault(nid(r, c), {})
            for r2 in range(rows):
                for c2 in range(cols):
                    if (r2, c2) == (r, c):
                        continue
                    if c2 != c:
                        step = (r, c + (1 if c2 > c else -1))
                    else:
                        step = (r + (1 if r2 > r else -1), c)
                    tb[nid(r2, c2)] = nid(*step)
    arch = Architecture(positions, dict(sorted(links.items())))
    return arch, RoutingTables({n: dict(sorted(tb.items())) for n, tb in sorted(tables.items())})
