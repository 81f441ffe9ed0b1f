"""Directed weighted application graphs (ACGs) and their text format.

File grammar, one record per line, ``#`` starts a comment::

    acg <node_count>
    node <id> <x_mm> <y_mm>          # "- -" when the node has no position
    edge <src> <dst> <volume_bits> <bandwidth_bps>
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable, Mapping, NamedTuple, Optional, Tuple

Position = Tuple[float, float]
Pair = Tuple[int, int]
EdgeSet = frozenset  # frozenset[Pair]


class AcgError(ValueError):
    """Malformed graph content; ``line`` is set for parse errors."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Edge(NamedTuple):
    src: int
    dst: int
    volume: float
    bandwidth: float

    @property
    def pair(self) -> Pair:
        return (self.src, self.dst)


def edge_set(pairs: Iterable[Pair]) -> EdgeSet:
    """Build an edge set, refusing duplicate pairs."""
    out = set()
    for s, d in pairs:
        p = (int(s), int(d))
        if p in out:
            raise AcgError(f"duplicate pair {p}")
        out.add(p)
    return frozenset(out)


def canonical(pairs: Iterable[Pair]) -> Tuple[Pair, ...]:
    return tuple(sorted(pairs))


class Acg:
    """Immutable application characterization graph.

    Nodes carry an optional floorplan position, edges carry a communication
    volume (bits) and a bandwidth requirement (bits/s).
    """

    __slots__ = ("_pos", "_edges", "_succ", "_pred", "_hash")

    def __init__(
        self,
        nodes: Mapping[int, Optional[Position]] | Iterable[int] = (),
        edges: Iterable[Edge | tuple] = (),
    ):
        if isinstance(nodes, Mapping):
            items = list(nodes.items())
        else:
            items = [(n, None) for n in nodes]
        pos: dict[int, Optional[Position]] = {}
        for nid, p in items:
            nid = int(nid)
            if nid < 1:
                raise AcgError(f"node id must be >= 1, got {nid}")
            if nid in pos:
                raise AcgError(f"duplicate node {nid}")
            if p is not None:
                p = (float(p[0]), float(p[1]))
                if not all(math.isfinite(c) for c in p):
                    raise AcgError(f"node {nid} has non-finite position")
            pos[nid] = p
        emap: dict[Pair, Edge] = {}
        for e in edges:
            e = Edge(int(e[0]), int(e[1]), e[2], e[3])
            if e.src == e.dst:
                raise AcgError(f"self-loop on node {e.src}")
            for end in e.pair:
                if end not in pos:
                    raise AcgError(f"edge {e.src}->{e.dst} references unknown node {end}")
            if e.pair in emap:
                raise AcgError(f"duplicate edge {e.src}->{e.dst}")
            for val, what in ((e.volume, "volume"), (e.bandwidth, "bandwidth")):
                if not math.isfinite(val) or val < 0:
                    raise AcgError(f"edge {e.src}->{e.dst}: {what} must be finite and >= 0")
            emap[e.pair] = e
        self._pos = dict(sorted(pos.items()))
        self._edges = dict(sorted(emap.items()))
        succ: dict[int, set] = {n: set() for n in self._pos}
        pred: dict[int, set] = {n: set() for n in self._pos}
        for s, d in self._edges:
            succ[s].add(d)
            pred[d].add(s)
        self._succ = {n: frozenset(v) for n, v in succ.items()}
        self._pred = {n: frozenset(v) for n, v in pred.items()}
        self._hash = None

    # -- accessors -------------------------------------------------------
    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(self._pos)

    @property
    def positions(self) -> Mapping[int, Optional[Position]]:
        return dict(self._pos)

    def position(self, n: int) -> Optional[Position]:
        if n not in self._pos:
            raise AcgError(f"unknown node {n}")
        return self._pos[n]

    @property
    def edges(self) -> Tuple[Edge, ...]:
        return tuple(self._edges.values())

    @property
    def edge_set(self) -> EdgeSet:
        return frozenset(self._edges)

    def edge(self, s: int, d: int) -> Edge:
        return self._edges[(s, d)]

    def has_edge(self, s: int, d: int) -> bool:
        return (s, d) in self._edges

    def has_node(self, n: int) -> bool:
        return n in self._pos

    def volume(self, s: int, d: int) -> float:
        return self._edges[(s, d)].volume

    def bandwidth(self, s: int, d: int) -> float:
        return self._edges[(s, d)].bandwidth

    def successors(self, n: int) -> frozenset:
        return self._succ[n]

    def predecessors(self, n: int) -> frozenset:
        return self._pred[n]

    def __len__(self) -> int:
        return len(self._pos)

    def number_of_edges(self) -> int:
        return len(self._edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Acg):
            return NotImplemented
        return self._pos == other._pos and self._edges == other._edges

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((tuple(self._pos.items()), tuple(self._edges.values())))
        return self._hash

    def __repr__(self) -> str:
        return f"Acg(nodes={len(self._pos)}, edges={len(self._edges)})"

    def to_networkx(self):
        import networkx as nx

        g = nx.DiGraph()
        for n, p in self._pos.items():
            g.add_node(n, pos=p)
        for e in self._edges.values():
            g.add_edge(e.src, e.dst, volume=e.volume, bandwidth=e.bandwidth)
        return g


# -- text format -------------------------------------------------------------

def _number(tok: str, lineno: int) -> float:
    try:
        val = int(tok)
    except ValueError:
        try:
            val = float(tok)
        except ValueError:
            raise AcgError(f"expected a number, got {tok!r}", lineno) from None
    return val


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise AcgError(f"expected an integer, got {tok!r}", lineno) from None


def fmt_number(x: float) -> str:
    if isinstance(x, int) or (isinstance(x, float) and x.is_integer() and abs(x) < 1e15):
        return str(int(x))
    return repr(float(x))


def parse_acg(text: str) -> Acg:
    declared = None
    nodes: dict[int, Optional[Position]] = {}
    edges: list[Edge] = []
    seen: set[Pair] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        kw = tok[0]
        if declared is None:
            if kw != "acg" or len(tok) != 2:
                raise AcgError("first record must be 'acg <node_count>'", lineno)
            declared = _int(tok[1], lineno)
            if declared < 0:
                raise AcgError("node count must be >= 0", lineno)
            continue
        if kw == "node":
            if len(tok) != 4:
                raise AcgError("expected 'node <id> <x> <y>'", lineno)
            nid = _int(tok[1], lineno)
            if nid in nodes:
                raise AcgError(f"duplicate node {nid}", lineno)
            if tok[2] == "-" and tok[3] == "-":
                nodes[nid] = None
            elif "-" in (tok[2], tok[3]):
                raise AcgError("position must give both coordinates or '- -'", lineno)
            else:
                nodes[nid] = (float(_number(tok[2], lineno)), float(_number(tok[3], lineno)))
        elif kw == "edge":
            if len(tok) != 5:
                raise AcgError("expected 'edge <src> <dst> <volume> <bandwidth>'", lineno)
            s, d = _int(tok[1], lineno), _int(tok[2], lineno)
            vol, bw = _number(tok[3], lineno), _number(tok[4], lineno)
            if s == d:
                raise AcgError(f"self-loop on node {s}", lineno)
            if vol < 0 or bw < 0:
                raise AcgError("negative weight", lineno)
            for end in (s, d):
                if end not in nodes:
                    raise AcgError(f"edge references unknown node {end}", lineno)
            if (s, d) in seen:
                raise AcgError(f"duplicate edge {s}->{d}", lineno)
            seen.add((s, d))
            edges.append(Edge(s, d, vol, bw))
        else:
            raise AcgError(f"unknown record {kw!r}", lineno)
    if declared is None:
        raise AcgError("empty input, expected 'acg <node_count>'", 1)
    if declared != len(nodes):
        raise AcgError(f"header declares {declared} nodes, found {len(nodes)}")
    try:
        return Acg(nodes, edges)
    except AcgError as exc:
        raise AcgError(str(exc)) from None


def serialize_acg(g: Acg) -> str:
    lines = [f"acg {len(g)}"]
    for n in g.nodes:
        p = g.position(n)
        if p is None:
            lines.append(f"node {n} - -")
        else:
            lines.append(f"node {n} {fmt_number(p[0])} {fmt_number(p[1])}")
    for e in g.edges:
        lines.append(f"edge {e.src} {e.dst} {fmt_number(e.volume)} {fmt_number(e.bandwidth)}")
    return "\n".join(lines) + "\n"


# -- graph operations ----------------------------------------------------------

def remove_edges(g: Acg, s: Iterable[Pair]) -> Acg:
    """Subtract an edge set, keeping every node (and its position)."""
    drop = set(s)
    missing = drop - g.edge_set
    if missing:
        raise AcgError(f"edges not in graph: {sorted(missing)}")
    return Acg(g.positions, [e for e in g.edges if e.pair not in drop])


def bfs_hops(adj: Mapping[int, Iterable[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def diameter(g: Acg, treat_as_undirected: bool = False) -> float:
    """Largest shortest-path hop count over ordered node pairs; inf if some pair is unreachable."""
    if treat_as_undirected:
        adj = {n: g.successors(n) | g.predecessors(n) for n in g.nodes}
    else:
        adj = {n: g.successors(n) for n in g.nodes}
    return adjacency_diameter(adj)


def adjacency_diameter(adj: Mapping[int, Iterable[int]]) -> float:
    best = 0
    for n in adj:
        dist = bfs_hops(adj, n)
        if len(dist) < len(adj):
            return math.inf
        best = max(best, max(dist.values()))
    return best
