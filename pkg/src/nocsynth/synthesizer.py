"""Glue matched primitives into a physical architecture with routing tables.

Every match contributes its implementation links on the mapped nodes and
every remainder edge a direct link; duplicates merge.  Routing is
destination based: each node keeps one next hop per destination it
forwards to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

import networkx as nx

from .bisection import Bisection
from .decomposer import (
    Decomposition,
    RoutingError,
    bisection_bandwidth,
    channel_demand,
    next_hop_map,
    routed_paths,
    table_paths,
)
from .energy import EnergyModel, distance
from .graph import Acg, AcgError, Pair, Position, fmt_number
from .library import Library, builtin_library

Origin = Union[int, str]  # match index or "remainder"


class ArchError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    capacity: float
    length_mm: float
    origin: Tuple[Origin, ...] = ()
    demand: float = 0.0  # largest per-direction mapped bandwidth


@dataclass
class Architecture:
    positions: dict  # node -> position or None
    links: dict = field(default_factory=dict)  # (a, b) with a < b -> Link

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(sorted(self.positions))

    def has_link(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self.links

    def neighbours(self, n: int) -> list[int]:
        out = []
        for a, b in self.links:
            if a == n:
                out.append(b)
            elif b == n:
                out.append(a)
        return sorted(out)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        for (a, b), lk in self.links.items():
            g.add_edge(a, b, capacity=lk.capacity, length=lk.length_mm)
        return g

    def total_wire_mm(self) -> float:
        return math.fsum(lk.length_mm for lk in self.links.values())


@dataclass
class RoutingTables:
    next_hop: dict = field(default_factory=dict)  # node -> {dst: next node}

    def lookup(self, node: int, dst: int) -> int:
        try:
            return self.next_hop[node][dst]
        except KeyError:
            raise ArchError(f"node {node} has no route to {dst}") from None

    def walk(self, src: int, dst: int) -> list[int]:
        """Node sequence from src to dst; raises on a loop or a missing entry."""
        path = [src]
        seen = {src}
        while path[-1] != dst:
            nxt = self.lookup(path[-1], dst)
            if nxt in seen:
                raise ArchError(f"routing loop from {src} to {dst}: {path + [nxt]}")
            seen.add(nxt)
            path.append(nxt)
        return path

    def entries(self):
        for node in sorted(self.next_hop):
            for dst in sorted(self.next_hop[node]):
                yield node, dst, self.next_hop[node][dst]

    def __len__(self) -> int:
        return sum(len(t) for t in self.next_hop.values())


def _key(u: int, v: int) -> Pair:
    return (u, v) if u < v else (v, u)


def glue(d: Decomposition, g: Acg, lib: Optional[Library] = None, em: Optional[EnergyModel] = None,
         default_capacity: float = 0.0) -> Architecture:
    lib = lib or builtin_library()
    em = em or EnergyModel.unit()
    covered = set()
    for m in d.matches:
        if covered & set(m.covered):
            raise ArchError("matches overlap")
        covered |= set(m.covered)
    if covered & set(d.remainder) or covered | set(d.remainder) != set(g.edge_set):
        raise ArchError("decomposition does not reconstruct the graph")
    origins: dict[Pair, list] = {}
    for i, m in enumerate(d.matches):
        p = lib.by_id(m.primitive_id)
        for a, b in p.implementation:
            origins.setdefault(_key(m.image(a), m.image(b)), []).append(i)
    for s, t in d.remainder:
        origins.setdefault(_key(s, t), []).append("remainder")
    try:
        demand = channel_demand(table_paths(routed_paths(d, g, lib)), g)
    except RoutingError as exc:
        raise ArchError(str(exc)) from None
    arch = Architecture(dict(g.positions))
    for lk in sorted(origins):
        need = max(demand.get(lk, 0.0), demand.get(lk[::-1], 0.0))
        length = distance(g, lk[0], lk[1], em.metric, em.default_link_mm)
        arch.links[lk] = Link(lk[0], lk[1], max(default_capacity, need), length, tuple(origins[lk]), need)
    return arch


def build_routing_tables(a: Architecture, d: Decomposition, g: Acg, lib: Optional[Library] = None) -> RoutingTables:
    """Install every routed ACG pair hop by hop; an earlier writer keeps its entry.

    Matches are installed in canonical order before remainder edges, so a
    primitive route wins over a direct link for the same destination.  A
    pair whose route loses an entry follows the kept one from there on.
    """
    lib = lib or builtin_library()
    paths = routed_paths(d, g, lib)
    for (s, t), path in paths:
        for u, v in zip(path, path[1:]):
            if not a.has_link(u, v):
                raise ArchError(f"route {s}->{t} uses missing link {u}-{v}")
    table = next_hop_map(paths)
    rt = RoutingTables({n: dict(sorted(table.get(n, {}).items())) for n in a.nodes})
    for s, t in g.edge_set:
        rt.walk(s, t)
    return rt


# -- channel dependencies ----------------------------------------------------------

def channel_dependency_graph(a: Architecture, t: RoutingTables) -> nx.DiGraph:
    """Nodes are directed channels; an arc joins consecutive channels of some route."""
    cdg = nx.DiGraph()
    for (x, y) in a.links:
        cdg.add_node((x, y))
        cdg.add_node((y, x))
    for node, dst, _ in t.entries():
        path = t.walk(node, dst)
        for u, v, w in zip(path, path[1:], path[2:]):
            cdg.add_edge((u, v), (v, w))
    return cdg


def _canonical_cycle(cyc: list) -> tuple:
    i = cyc.index(min(cyc))
    return tuple(cyc[i:] + cyc[:i])


def detect_deadlock(a: Architecture, t: RoutingTables) -> list[tuple]:
    """Elementary cycles of the channel dependency graph, each starting at its smallest channel."""
    cdg = channel_dependency_graph(a, t)
    return sorted(_canonical_cycle(c) for c in nx.simple_cycles(cdg))


def has_dependency_cycle(a: Architecture, t: RoutingTables) -> bool:
    return not nx.is_directed_acyclic_graph(channel_dependency_graph(a, t))


def min_virtual_channels(a: Architecture, t: RoutingTables) -> int:
    """VC classes needed when a packet moves up one class on every backward dependency.

    Channels are ranked by a greedy feedback-arc-set ordering; a route needs
    one class more than its count of rank-decreasing steps.
    """
    cdg = channel_dependency_graph(a, t)
    if nx.is_directed_acyclic_graph(cdg):
        return 1
    rank = {ch: i for i, ch in enumerate(_eades_order(cdg))}
    need = 1
    for node, dst, _ in t.entries():
        path = t.walk(node, dst)
        chans = list(zip(path, path[1:]))
        back = sum(1 for c1, c2 in zip(chans, chans[1:]) if rank[c2] < rank[c1])
        need = max(need, back + 1)
    return need


def vc_classes(a: Architecture, t: RoutingTables) -> dict:
    """(channel sequence position) -> VC class for every route, keyed by (node, dst)."""
    cdg = channel_dependency_graph(a, t)
    if nx.is_directed_acyclic_graph(cdg):
        return {}
    rank = {ch: i for i, ch in enumerate(_eades_order(cdg))}
    out = {}
    for node, dst, _ in t.entries():
        path = t.walk(node, dst)
        chans = list(zip(path, path[1:]))
        cls = [0]
        for c1, c2 in zip(chans, chans[1:]):
            cls.append(cls[-1] + (rank[c2] < rank[c1]))
        out[(node, dst)] = tuple(cls)
    return out


def _eades_order(g: nx.DiGraph) -> list:
    """Eades-Lin-Smyth vertex ordering with few backward arcs; deterministic."""
    g = g.copy()
    left, right = [], []
    while g:
        changed = True
        while changed:
            changed = False
            sinks = sorted(v for v in g if g.out_degree(v) == 0)
            for v in sinks:
                right.append(v)
                g.remove_node(v)
                changed = True
            sources = sorted(v for v in g if g.in_degree(v) == 0)
            for v in sources:
                left.append(v)
                g.remove_node(v)
                changed = True
        if g:
            v = max(sorted(g), key=lambda u: g.out_degree(u) - g.in_degree(u))
            left.append(v)
            g.remove_node(v)
    return left + right[::-1]


# -- properties --------------------------------------------------------------------

def max_route_hops(t: RoutingTables, pairs: Iterable[Pair]) -> int:
    return max((len(t.walk(s, d)) - 1 for s, d in pairs), default=0)


# -- architecture file ---------------------------------------------------------------

def write_architecture(a: Architecture, t: Optional[RoutingTables] = None) -> str:
    lines = [f"arch {len(a.nodes)}"]
    for n in a.nodes:
        p = a.positions.get(n)
        lines.append(f"node {n} {fmt_number(p[0])} {fmt_number(p[1])}" if p else f"node {n} - -")
    for (x, y), lk in a.links.items():
        lines.append(f"link {x} {y} {fmt_number(lk.capacity)} {fmt_number(lk.length_mm)}")
    if t is not None:
        lines += [f"route {n} {d} {h}" for n, d, h in t.entries()]
    return "\n".join(lines) + "\n"


def read_architecture(text: str) -> tuple[Architecture, RoutingTables]:
    positions: dict[int, Optional[Position]] = {}
    links: dict[Pair, Link] = {}
    tables: dict[int, dict[int, int]] = {}
    declared = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "arch" and len(tok) == 2:
                declared = int(tok[1])
            elif tok[0] == "node" and len(tok) == 4:
                pos = None if tok[2] == "-" else (float(tok[2]), float(tok[3]))
                positions[int(tok[1])] = pos
            elif tok[0] == "link" and len(tok) == 5:
                x, y = sorted((int(tok[1]), int(tok[2])))
                links[(x, y)] = Link(x, y, float(tok[3]), float(tok[4]))
            elif tok[0] == "route" and len(tok) == 4:
                tables.setdefault(int(tok[1]), {})[int(tok[2])] = int(tok[3])
            else:
                raise AcgError(f"unrecognised record {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, AcgError):
                raise
            raise AcgError(str(exc), lineno) from None
    if declared is not None and declared != len(positions):
        raise AcgError(f"header declares {declared} nodes, found {len(positions)}")
    for x, y in links:
        if x not in positions or y not in positions:
            raise AcgError(f"link {x}-{y} references an unknown node")
    arch = Architecture(positions, dict(sorted(links.items())))
    for n in positions:
        tables.setdefault(n, {})
    return arch, RoutingTables({n: dict(sorted(tb.items())) for n, tb in sorted(tables.items())})


def write_routes(t: RoutingTables) -> str:
    return "".join(f"route {n} {d} {h}\n" for n, d, h in t.entries())


def architecture_stats(a: Architecture, t: RoutingTables, g: Acg) -> dict:
    cut = bisection_bandwidth(a) if len(a.nodes) >= 2 else Bisection(0.0, (), True)
    return {
        "nodes": len(a.nodes),
        "links": len(a.links),
        "wire_mm": a.total_wire_mm(),
        "bisection_bandwidth": cut.bandwidth,
        "bisection_exact": cut.exact,
        "max_route_hops": max_route_hops(t, g.edge_set),
        "cdg_cycles": len(detect_deadlock(a, t)),
        "min_virtual_channels": min_virtual_channels(a, t),
    }
