"""Subgraph monomorphism enumeration of primitive patterns into an ACG.

Matching is non-induced: a primitive matches wherever all of its
representation edges exist in the host; other host edges among the same
vertices stay untouched.  The search is a VF2-style backtracking over
pattern vertices in connectivity order, with candidates taken from the
neighbourhoods of already-mapped vertices.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Tuple

from .graph import Acg, Pair
from .library import CommPrimitive

DEFAULT_TIMEOUT = 10.0


@dataclass(frozen=True)
class Match:
    primitive_id: int
    mapping: Tuple[int, ...]  # mapping[i - 1] is the host node of primitive vertex i
    covered: Tuple[Pair, ...]  # sorted host edges

    def image(self, v: int) -> int:
        return self.mapping[v - 1]

    @property
    def vertices(self) -> frozenset:
        return frozenset(self.mapping)

    @property
    def covered_set(self) -> frozenset:
        return frozenset(self.covered)

    @property
    def key(self) -> tuple:
        return (self.primitive_id, self.covered, self.mapping)

    def mapped_route(self, p: CommPrimitive, a: int, b: int) -> Tuple[int, ...]:
        return tuple(self.mapping[v - 1] for v in p.route_map[(a, b)])

    def flows(self, p: CommPrimitive) -> list[tuple[Pair, Tuple[int, ...]]]:
        """(host edge, host path) for every representation edge, in host-edge order."""
        out = [((self.mapping[a - 1], self.mapping[b - 1]), self.mapped_route(p, a, b))
               for a, b in p.representation]
        out.sort()
        return out


class MatchSet(NamedTuple):
    matches: list
    truncated: bool

    def __iter__(self):
        return iter(self.matches)

    def __len__(self):
        return len(self.matches)

    def __getitem__(self, i):
        return self.matches[i]


class _Timeout(Exception):
    pass


def _search_order(p: CommPrimitive) -> list[int]:
    """Pattern vertices ordered so each one (after the first) touches an earlier one."""
    nbrs = {v: set() for v in range(1, p.k + 1)}
    deg = {v: 0 for v in nbrs}
    for a, b in p.representation:
        nbrs[a].add(b)
        nbrs[b].add(a)
        deg[a] += 1
        deg[b] += 1
    order: list[int] = []
    remaining = set(nbrs)
    while remaining:
        frontier = [v for v in remaining if nbrs[v] & set(order)] if order else []
        pool = frontier or list(remaining)
        v = min(pool, key=lambda u: (-len(nbrs[u] & set(order)), -deg[u], u))
        order.append(v)
        remaining.discard(v)
    return order


def iter_monomorphisms(host: Acg, p: CommPrimitive, deadline: Optional[float] = None) -> Iterator[Tuple[int, ...]]:
    """Yield every injective mapping (as a tuple indexed by pattern vertex - 1)."""
    order = _search_order(p)
    rep = set(p.representation)
    out_deg = {v: 0 for v in range(1, p.k + 1)}
    in_deg = dict(out_deg)
    for a, b in rep:
        out_deg[a] += 1
        in_deg[b] += 1
    # for each position, constraints against earlier pattern vertices
    checks = []
    for i, v in enumerate(order):
        earlier = order[:i]
        checks.append((
            [w for w in earlier if (w, v) in rep],  # need host edge f(w) -> f(v)
            [w for w in earlier if (v, w) in rep],  # need host edge f(v) -> f(w)
        ))
    host_nodes = host.nodes
    succ = {n: host.successors(n) for n in host_nodes}
    pred = {n: host.predecessors(n) for n in host_nodes}
    fits = {v: [n for n in host_nodes if len(succ[n]) >= out_deg[v] and len(pred[n]) >= in_deg[v]]
            for v in order}
    fit_sets = {v: set(fits[v]) for v in order}

    mapping: dict[int, int] = {}
    used: set[int] = set()
    steps = 0
    k = p.k

    def extend(i: int):
        nonlocal steps
        steps += 1
        if deadline is not None and steps % 512 == 0 and time.monotonic() > deadline:
            raise _Timeout
        if i == k:
            yield tuple(mapping[v] for v in range(1, k + 1))
            return
        v = order[i]
        from_w, to_w = checks[i]
        cands = None
        for w in from_w:
            s = succ[mapping[w]]
            cands = s if cands is None else cands & s
        for w in to_w:
            s = pred[mapping[w]]
            cands = s if cands is None else cands & s
        if cands is None:
            pool = fits[v]
        else:
            pool = sorted(c for c in cands if c in fit_sets[v])
        for n in pool:
            if n in used:
                continue
            mapping[v] = n
            used.add(n)
            yield from extend(i + 1)
            used.discard(n)
            del mapping[v]

    yield from extend(0)


def make_match(p: CommPrimitive, mapping: Tuple[int, ...]) -> Match:
    covered = tuple(sorted((mapping[a - 1], mapping[b - 1]) for a, b in p.representation))
    return Match(p.id, tuple(mapping), covered)


def physical_image(p: CommPrimitive, m: Match) -> tuple:
    """Mapped routes of every covered edge: equal images mean identical hardware and routing."""
    return tuple(sorted(path for _, path in m.flows(p)))


def enumerate_matches(
    host: Acg,
    p: CommPrimitive,
    timeout: Optional[float] = DEFAULT_TIMEOUT,
    variants: bool = False,
) -> MatchSet:
    """All matches of ``p`` in ``host`` in canonical order.

    Matches with the same covered edge set are merged and the lexicographically
    smallest mapping is kept.  With ``variants=True`` mappings are only merged
    when they also induce the same mapped routes, so physically distinct
    placements of the same covering survive.
    """
    deadline = None if timeout is None else time.monotonic() + timeout
    best: dict[tuple, Match] = {}
    truncated = False
    try:
        for mapping in iter_monomorphisms(host, p, deadline):
            m = make_match(p, mapping)
            key = (m.covered, physical_image(p, m)) if variants else m.covered
            prev = best.get(key)
            if prev is None or m.mapping < prev.mapping:
                best[key] = m
    except _Timeout:
        truncated = True
    matches = sorted(best.values(), key=lambda m: (m.covered, m.mapping))
    return MatchSet(matches, truncated)


def verify_match(host: Acg, p: CommPrimitive, m: Match) -> bool:
    if m.primitive_id != p.id or len(m.mapping) != p.k:
        return False
    if len(set(m.mapping)) != p.k:
        return False
    if not all(host.has_node(n) for n in m.mapping):
        return False
    image = []
    for a, b in p.representation:
        e = (m.mapping[a - 1], m.mapping[b - 1])
        if not host.has_edge(*e):
            return False
        image.append(e)
    return tuple(sorted(image)) == tuple(m.covered)
