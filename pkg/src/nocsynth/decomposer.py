"""Branch-and-bound covering of an ACG by edge-disjoint primitive matches.

A decomposition is a set of edge-disjoint matches plus a remainder of
uncovered edges, and its cost is the sum of the match costs and the
remainder cost.  The search branches on the smallest undecided edge: the
edge is either covered by one of the still-available matches containing it,
or it is sent to the remainder.  Every set of disjoint matches is reached
exactly once that way.  A node is pruned when its cost so far plus an
admissible per-edge bound exceeds the incumbent.

Ties between equal-cost decompositions go to the lexicographically smallest
sorted sequence of ``(primitive_id, covered, mapping)`` keys, where running
out of elements sorts last.
"""

from __future__ import annotations

import itertools
import math
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Tuple

from .bisection import Bisection, min_bisection
from .energy import EnergyModel
from .graph import Acg, AcgError, Pair, fmt_number
from .isomorphism import DEFAULT_TIMEOUT, Match, enumerate_matches, verify_match
from .library import CommPrimitive, Library, builtin_library

COST_MODES = ("link", "flow")
_END = sys.maxsize  # sentinel closing every decomposition key


def _link(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Constraints:
    max_link_bandwidth: float = math.inf  # bits/s per link direction
    max_bisection_bandwidth: float = math.inf

    def __post_init__(self):
        for name in ("max_link_bandwidth", "max_bisection_bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive or inf")

    @property
    def unlimited(self) -> bool:
        return math.isinf(self.max_link_bandwidth) and math.isinf(self.max_bisection_bandwidth)


class Violation(NamedTuple):
    kind: str  # "link" or "bisection"
    where: tuple  # directed channel, or one side of the cut
    demand: float
    limit: float

    def __str__(self) -> str:
        if self.kind == "link":
            u, v = self.where
            return (f"link {u}-{v} direction {u}->{v}: demand {fmt_number(self.demand)} "
                    f"exceeds max link bandwidth {fmt_number(self.limit)}")
        side = " ".join(map(str, self.where))
        return (f"bisection bandwidth {fmt_number(self.demand)} exceeds max "
                f"{fmt_number(self.limit)} (minimum balanced cut separates {{{side}}})")


class Infeasible(Exception):
    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        msg = "; ".join(str(v) for v in self.violations) or "no feasible decomposition"
        super().__init__(msg)


@dataclass(frozen=True)
class Decomposition:
    matches: Tuple[Match, ...]
    remainder: Tuple[Pair, ...]
    cost: float
    truncated: bool = False
    stats: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def key(self) -> tuple:
        return tuple(m.key for m in self.matches)

    def listing(self, library: Library, with_cost: bool = True) -> str:
        return format_listing(self, library, with_cost)


def format_listing(d: Decomposition, library: Library, with_cost: bool = True) -> str:
    lines = []
    if with_cost:
        lines.append(f"COST: {fmt_number(d.cost)}")
    for m in d.matches:
        name = library.by_id(m.primitive_id).name
        pairs = ", ".join(f"({i} {v})" for i, v in enumerate(m.mapping, start=1))
        lines.append(f"{m.primitive_id}: {name}, Mapping: {pairs}")
    lines.append("0: Remaining Graph:")
    lines += [f"edge {s} {d_}" for s, d_ in d.remainder]
    return "\n".join(lines) + "\n"


# -- costs ------------------------------------------------------------------------

def _primitive(m: Match, library: Optional[Library]) -> CommPrimitive:
    return (library or builtin_library()).by_id(m.primitive_id)


def link_flows(m: Match, p: CommPrimitive) -> dict[Pair, list[Pair]]:
    """Host implementation link -> covered host edges routed across it."""
    loads: dict[Pair, list[Pair]] = {}
    for a, b in p.implementation:
        loads[_link(m.image(a), m.image(b))] = []
    for edge, path in m.flows(p):
        for u, v in zip(path, path[1:]):
            loads[_link(u, v)].append(edge)
    return loads


def match_charges(m: Match, g: Acg, em: EnergyModel, library: Optional[Library] = None, mode: str = "link",
                  cost: Optional[float] = None) -> dict[Pair, float]:
    """Split the cost of ``m`` over its covered edges in proportion to their remainder cost.

    The charges sum to the match cost, so summing the cheapest charge of every
    edge bounds any covering from below.  Every edge of a match is charged at
    the same ratio of match cost to remainder cost.
    """
    if cost is None:
        cost = match_cost(m, g, em, library, mode)
    weights = [em.link_energy(g, *e) * g.volume(*e) for e in m.covered]
    total = math.fsum(weights)
    if total == 0:
        return {e: cost / len(m.covered) for e in m.covered}
    return {e: cost * w / total for e, w in zip(m.covered, weights)}


def match_cost(m: Match, g: Acg, em: EnergyModel, library: Optional[Library] = None, mode: str = "link") -> float:
    """Energy of a match: every implementation link pays its bit energy times its load.

    The load is the largest volume routed across the link in ``link`` mode
    and the summed volume in ``flow`` mode.  Unused links cost nothing.
    """
    if mode not in COST_MODES:
        raise ValueError(f"unknown cost mode {mode!r}")
    p = _primitive(m, library)
    if not verify_match(g, p, m):
        raise AcgError(f"match {m} does not fit the graph")
    terms = []
    for link, edges in link_flows(m, p).items():
        if not edges:
            continue
        eb = em.link_energy(g, *link)
        vols = [g.volume(*e) for e in edges]
        terms.append(eb * (sum(vols) if mode == "flow" else max(vols)))
    return math.fsum(terms)


def _edge_remainder_cost(e: Pair, g: Acg, em: EnergyModel) -> float:
    return em.remainder_penalty * em.link_energy(g, *e) * g.volume(*e)


def remainder_cost(r: Iterable[Pair], g: Acg, em: EnergyModel) -> float:
    r = list(r)
    for e in r:
        if not g.has_edge(*e):
            raise AcgError(f"remainder edge {e} not in graph")
    return math.fsum(_edge_remainder_cost(e, g, em) for e in r)


def lower_bound(
    r: Iterable[Pair],
    g: Acg,
    em: EnergyModel,
    matches: Iterable[Match] = (),
    library: Optional[Library] = None,
    mode: str = "link",
    include_penalty: bool = False,
) -> float:
    """Admissible bound on the cost of covering ``r``.

    Each edge contributes the least it can cost: its direct-link bit energy
    times volume, or its share of any supplied match lying inside ``r``.
    ``include_penalty`` charges direct links at the remainder penalty, which
    is still admissible because a direct link is only used as remainder.
    """
    r = set(r)
    scale = em.remainder_penalty if include_penalty else 1.0
    best = {e: scale * em.link_energy(g, *e) * g.volume(*e) for e in r}
    for m in matches:
        if not set(m.covered) <= r:
            continue
        for e, ch in match_charges(m, g, em, library, mode).items():
            if ch < best[e]:
                best[e] = ch
    return math.fsum(best.values())


# -- routing and constraints ---------------------------------------------------------

def routed_paths(d: Decomposition, g: Acg, library: Optional[Library] = None) -> list[tuple[Pair, Tuple[int, ...]]]:
    """Host path of every ACG edge: primitive route when covered, direct link otherwise."""
    lib = library or builtin_library()
    out = []
    for m in d.matches:
        out += m.flows(lib.by_id(m.primitive_id))
    out += [(e, e) for e in d.remainder]
    return out


class RoutingError(ValueError):
    pass


def next_hop_map(paths: Iterable[tuple[Pair, Tuple[int, ...]]]) -> dict[int, dict[int, int]]:
    """Destination-based next hops; the first path to claim (node, destination) keeps it."""
    table: dict[int, dict[int, int]] = defaultdict(dict)
    for (_, t), path in paths:
        for u, v in zip(path, path[1:]):
            table[u].setdefault(t, v)
    return dict(table)


def route_conflicts(paths: Iterable[tuple[Pair, Tuple[int, ...]]]) -> list[tuple[int, int, int, int]]:
    """(node, destination, kept hop, overridden hop) for every path a destination table cannot follow."""
    table: dict[tuple, int] = {}
    out = []
    for (_, t), path in paths:
        for u, v in zip(path, path[1:]):
            kept = table.setdefault((u, t), v)
            if kept != v:
                out.append((u, t, kept, v))
    return out


def table_paths(paths: Sequence[tuple[Pair, Tuple[int, ...]]]) -> list[tuple[Pair, Tuple[int, ...]]]:
    """The paths packets actually take once ``paths`` are folded into destination tables."""
    table = next_hop_map(paths)
    out = []
    for (s, t), _ in paths:
        walk, seen = [s], {s}
        while walk[-1] != t:
            nxt = table.get(walk[-1], {}).get(t)
            if nxt is None or nxt in seen:
                raise RoutingError(f"destination tables cannot route {s}->{t}: {walk + [nxt]}")
            seen.add(nxt)
            walk.append(nxt)
        out.append(((s, t), tuple(walk)))
    return out


def channel_demand(paths: Iterable[tuple[Pair, Tuple[int, ...]]], g: Acg) -> dict[Pair, float]:
    demand: dict[Pair, float] = defaultdict(float)
    for e, path in paths:
        bw = g.bandwidth(*e)
        for u, v in zip(path, path[1:]):
            demand[(u, v)] += bw
    return dict(demand)


def link_capacities(demand: dict[Pair, float], default_capacity: float = 0.0) -> dict[Pair, float]:
    caps: dict[Pair, float] = {}
    for (u, v), bw in demand.items():
        lk = _link(u, v)
        caps[lk] = max(caps.get(lk, default_capacity), bw)
    return caps


def check_bandwidth(d: Decomposition, g: Acg, c: Constraints, library: Optional[Library] = None) -> list[Violation]:
    if math.isinf(c.max_link_bandwidth):
        return []
    demand = channel_demand(table_paths(routed_paths(d, g, library)), g)
    return [Violation("link", ch, bw, c.max_link_bandwidth)
            for ch, bw in sorted(demand.items()) if bw > c.max_link_bandwidth]


def bisection_bandwidth(arch) -> Bisection:
    """Minimum balanced cut of an architecture's link capacities."""
    return min_bisection(arch.nodes, {lk: link.capacity for lk, link in arch.links.items()})


def _check_bisection(nodes, demand: dict[Pair, float], c: Constraints) -> list[Violation]:
    if math.isinf(c.max_bisection_bandwidth) or len(nodes) < 2:
        return []
    cut = min_bisection(nodes, link_capacities(demand))
    if cut.bandwidth > c.max_bisection_bandwidth:
        return [Violation("bisection", cut.part, cut.bandwidth, c.max_bisection_bandwidth)]
    return []


def check_constraints(d: Decomposition, g: Acg, c: Constraints, library: Optional[Library] = None) -> list[Violation]:
    out = check_bandwidth(d, g, c, library)
    if not math.isinf(c.max_bisection_bandwidth):
        out += _check_bisection(g.nodes, channel_demand(table_paths(routed_paths(d, g, library)), g), c)
    return out


# -- search ----------------------------------------------------------------------------

def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass
class _Problem:
    """One independent search problem over local edge/candidate indices.

    Candidates sharing a tag and a covered edge set are variants of one
    placement; they must be listed contiguously.
    """

    rem_cost: list[float]
    cand_cost: list[float]
    cand_edges: list[list[int]]
    cand_charge: list[list[float]]  # aligned with cand_edges
    cand_tag: Optional[list] = None
    prune: bool = True
    max_depth: Optional[int] = None


class _Load:
    """Per-channel bandwidth of the decided part of a search path.

    Demand only grows along a path, so exceeding the cap prunes the subtree.
    """

    def __init__(self, limit: float, cand_items: list, rem_items: list):
        self.limit = limit
        self.cand_items = cand_items
        self.rem_items = rem_items
        self.demand: dict = defaultdict(float)

    def push(self, items) -> bool:
        ok = True
        for ch, bw in items:
            self.demand[ch] += bw
            ok &= self.demand[ch] <= self.limit
        return ok

    def pop(self, items) -> None:
        for ch, bw in items:
            self.demand[ch] -= bw


class _Found(Exception):
    pass


class _Search:
    """Branch and bound over variant groups, resolving variants at the leaves.

    ``phase`` is ``full`` (no pruning, exact tie-break at every leaf),
    ``cost`` (strict improvements only) or ``witness`` (stop at the first
    decomposition within ``target``).
    """

    def __init__(self, prob: _Problem, leaf_ok: Optional[Callable] = None, on_leaf: Optional[Callable] = None,
                 load: Optional[_Load] = None):
        self.prob = prob
        self.leaf_ok = leaf_ok
        self.on_leaf = on_leaf
        self.load = load
        n_e = len(prob.rem_cost)
        tags = prob.cand_tag or [0] * len(prob.cand_cost)
        # contiguous runs of identical (tag, covered edges) form a group
        self.variants: list[list[int]] = []
        prev = None
        for c, es in enumerate(prob.cand_edges):
            sig = (tags[c], tuple(es))
            if sig != prev:
                self.variants.append([])
                prev = sig
            self.variants[-1].append(c)
        n_g = len(self.variants)
        self.g_edges = [prob.cand_edges[vs[0]] for vs in self.variants]
        self.g_cost = [min(prob.cand_cost[c] for c in vs) for vs in self.variants]
        g_charge = [[min(prob.cand_charge[c][i] for c in vs) for i in range(len(es))]
                    for vs, es in zip(self.variants, self.g_edges)]
        self.by_cost = [sorted(vs, key=lambda c: (prob.cand_cost[c], c)) for vs in self.variants]
        self.all_edges = (1 << n_e) - 1
        self.cmask = [sum(1 << e for e in es) for es in self.g_edges]
        self.edge_groups: list[list[int]] = [[] for _ in range(n_e)]
        for gi, es in enumerate(self.g_edges):
            for e in es:
                self.edge_groups[e].append(gi)
        self.edge_gmask = [sum(1 << gi for gi in gs) for gs in self.edge_groups]
        self.conflict = []
        for gi in range(n_g):
            m = 0
            for e in self.g_edges[gi]:
                m |= self.edge_gmask[e]
            self.conflict.append(m)
        # cheapest charge first, for the bound
        self.edge_lb = []
        for e in range(n_e):
            lst = [(g_charge[gi][self.g_edges[gi].index(e)], gi) for gi in self.edge_groups[e]]
            self.edge_lb.append(sorted(x for x in lst if x[0] < prob.rem_cost[e]))
        # branch on the most cost-efficient groups first
        eff = []
        for gi in range(n_g):
            base = sum(prob.rem_cost[e] for e in self.g_edges[gi])
            eff.append(self.g_cost[gi] / base if base > 0 else 0.0)
        self.branch = [sorted(gs, key=lambda gi: (eff[gi], gi)) for gs in self.edge_groups]
        # bandwidth every variant of a group puts on a channel
        self.g_items = None
        if load is not None:
            self.g_items = []
            for vs in self.variants:
                common = None
                for c in vs:
                    d = dict(load.cand_items[c])
                    common = d if common is None else {ch: min(bw, d[ch]) for ch, bw in common.items() if ch in d}
                self.g_items.append(sorted(common.items()))
            # what each variant adds on top of its group's common demand
            self.extra = {}
            for gi, vs in enumerate(self.variants):
                common = dict(self.g_items[gi])
                for c in vs:
                    self.extra[c] = [(ch, bw - common.get(ch, 0.0)) for ch, bw in load.cand_items[c]
                                     if bw > common.get(ch, 0.0)]
        self.best_cost = math.inf
        self.best_choice: Optional[tuple] = None  # candidate indices
        self.phase = "full"
        self.target = math.inf
        self.fixed: dict = {}  # group -> candidate forced by the key phase
        self.nodes = 0
        self.leaves = 0

    @staticmethod
    def _tol(x: float) -> float:
        return 1e-9 * max(1.0, abs(x))

    def _bound(self, undecided: int, avail: int) -> float:
        rem = self.prob.rem_cost
        total = 0.0
        for e in _bits(undecided):
            best = rem[e]
            for ch, gi in self.edge_lb[e]:
                if (avail >> gi) & 1:
                    best = ch
                    break
            total += best
        return total

    # -- leaves ----------------------------------------------------------------------

    def _leaf(self, groups: tuple):
        self.leaves += 1
        covered = 0
        for gi in groups:
            covered |= self.cmask[gi]
        rem_edges = list(_bits(self.all_edges & ~covered))
        rem_total = math.fsum(self.prob.rem_cost[e] for e in rem_edges)
        if self.on_leaf is not None:
            self.on_leaf(tuple(self.variants[gi][0] for gi in groups), rem_edges)
        groups = tuple(sorted(groups))
        if self.phase == "full":
            self._leaf_full(groups, rem_edges)
            return
        if self.phase == "witness":
            limit, strict = self.target + self._tol(self.target), False
        elif self.best_choice is None:
            limit, strict = math.inf, False
        else:
            limit, strict = self.best_cost - self._tol(self.best_cost), True
        found = self._assign(groups, rem_edges, rem_total, limit, strict)
        if found is not None:
            self.best_cost, self.best_choice = found
            if self.phase == "witness":
                raise _Found

    def _total(self, choice, rem_edges) -> float:
        return math.fsum([self.prob.cand_cost[c] for c in choice] + [self.prob.rem_cost[e] for e in rem_edges])

    def _assign(self, groups, rem_edges, rem_total, limit, strict):
        """Cheapest feasible variant per group whose total beats ``limit``."""
        cost = self.prob.cand_cost
        options = [[self.fixed[gi]] if gi in self.fixed else self.by_cost[gi] for gi in groups]
        floor = [cost[opts[0]] for opts in options]
        rest = [0.0] * (len(groups) + 1)
        for i in range(len(groups) - 1, -1, -1):
            rest[i] = rest[i + 1] + floor[i]
        best = [limit, None]

        def beats(x):
            return x < best[0] if strict or best[1] is not None else x <= best[0]

        def rec(i, acc, picked):
            if not beats(acc + rest[i] + rem_total):
                return
            if i == len(groups):
                choice = tuple(sorted(picked))
                if self.leaf_ok is not None and not self.leaf_ok(choice, rem_edges):
                    return
                best[0], best[1] = self._total(choice, rem_edges), choice
                if self.phase == "witness" or self.leaf_ok is None:
                    raise _Found
                return
            fixed = groups[i] in self.fixed
            for c in options[i]:
                if self.load is None or fixed:
                    rec(i + 1, acc + cost[c], picked + [c])
                    continue
                extra = self.extra[c]
                ok = self.load.push(extra)
                try:
                    if ok:
                        rec(i + 1, acc + cost[c], picked + [c])
                finally:
                    self.load.pop(extra)

        try:
            rec(0, 0.0, [])
        except _Found:
            pass
        return None if best[1] is None else (best[0], best[1])

    def _leaf_full(self, groups, rem_edges):
        for choice in itertools.product(*(self.variants[gi] for gi in groups)):
            choice = tuple(sorted(choice))
            total = self._total(choice, rem_edges)
            if self.best_choice is not None:
                tol = self._tol(self.best_cost)
                if total > self.best_cost + tol:
                    continue
                if total >= self.best_cost - tol and choice + (_END,) > self.best_choice + (_END,):
                    continue
            if self.leaf_ok is not None and not self.leaf_ok(choice, rem_edges):
                continue
            self.best_cost, self.best_choice = total, choice

    # -- tree ------------------------------------------------------------------------

    def _dfs(self, undecided: int, avail: int, cost: float, chosen: tuple):
        self.nodes += 1
        prob = self.prob
        if undecided == 0 or (prob.max_depth is not None and len(chosen) >= prob.max_depth):
            self._leaf(chosen)
            return
        if self.phase == "witness":
            if cost + self._bound(undecided, avail) > self.target + self._tol(self.target):
                return
        elif self.phase == "cost" and self.best_choice is not None:
            # ties cannot improve the cost; the key is settled afterwards
            if cost + self._bound(undecided, avail) >= self.best_cost - self._tol(self.best_cost):
                return
        low = undecided & -undecided
        e = low.bit_length() - 1
        for gi in self.branch[e]:
            if (avail >> gi) & 1:
                self._descend(gi, undecided & ~self.cmask[gi], avail & ~self.conflict[gi],
                              cost + self.g_cost[gi], chosen + (gi,))
        load = self.load
        if load is not None:
            ok = load.push(load.rem_items[e])
            try:
                if ok:
                    self._dfs(undecided & ~low, avail & ~self.edge_gmask[e], cost + prob.rem_cost[e], chosen)
            finally:
                load.pop(load.rem_items[e])
            return
        self._dfs(undecided & ~low, avail & ~self.edge_gmask[e], cost + prob.rem_cost[e], chosen)

    def _descend(self, gi, undecided, avail, cost, chosen):
        load = self.load
        if load is None:
            self._dfs(undecided, avail, cost, chosen)
            return
        items = load.cand_items[self.fixed[gi]] if gi in self.fixed else self.g_items[gi]
        ok = load.push(items)
        try:
            if ok:
                self._dfs(undecided, avail, cost, chosen)
        finally:
            load.pop(items)

    def _smallest_key(self):
        """Lexicographically smallest optimal choice, deciding candidates in index order.

        A candidate is kept when some optimal feasible decomposition contains
        it together with everything kept so far; the latest witness answers
        for its own members without another search.
        """
        self.phase = "witness"
        self.target = self.best_cost
        witness = set(self.best_choice)
        group_of = {c: gi for gi, vs in enumerate(self.variants) for c in vs}
        undecided, avail, cost, kept = self.all_edges, (1 << len(self.variants)) - 1, 0.0, ()
        for gi, vs in enumerate(self.variants):
            if not (avail >> gi) & 1:
                continue
            if self.prob.max_depth is not None and len(kept) >= self.prob.max_depth:
                break
            pick = None
            for c in vs:
                if c in witness:
                    pick = c
                    break
                self.fixed[gi] = c
                try:
                    self._descend(gi, undecided & ~self.cmask[gi], avail & ~self.conflict[gi],
                                  cost + self.prob.cand_cost[c], kept + (gi,))
                except _Found:
                    pick = c
                    witness = set(self.best_choice)
                    break
                finally:
                    del self.fixed[gi]
            if pick is None:
                avail &= ~(1 << gi)
                continue
            self.fixed[gi] = pick
            if self.load is not None:
                self.load.push(self.load.cand_items[pick])
            undecided &= ~self.cmask[gi]
            avail &= ~self.conflict[gi]
            cost += self.prob.cand_cost[pick]
            kept += (gi,)
        choice = tuple(sorted(self.fixed[gi] for gi in kept))
        assert set(choice) == witness and all(group_of[c] in kept for c in choice)
        self.best_choice = choice
        self.best_cost = self._total(choice, list(_bits(undecided)))

    def run(self):
        limit = sys.getrecursionlimit()
        need = len(self.prob.rem_cost) + 100
        if need > limit:
            sys.setrecursionlimit(need)
        try:
            self.phase = "cost" if self.prob.prune else "full"
            self._dfs(self.all_edges, (1 << len(self.variants)) - 1, 0.0, ())
            if self.prob.prune and self.best_choice is not None:
                self._smallest_key()
        finally:
            sys.setrecursionlimit(limit)
        return self.best_choice, self.nodes, self.leaves


def _solve_component(prob: _Problem):
    return _Search(prob).run()


@dataclass
class _Candidate:
    match: Match
    cost: float
    charges: dict
    paths: list


def _candidates(g: Acg, lib: Library, em: EnergyModel, mode: str, timeout, collapse: bool):
    truncated = False
    cands: list[_Candidate] = []
    for p in lib:
        found = enumerate_matches(g, p, timeout=timeout, variants=True)
        truncated |= found.truncated
        by_cover: dict[tuple, list[_Candidate]] = defaultdict(list)
        for m in found:
            cost = match_cost(m, g, em, lib, mode)
            charges = match_charges(m, g, em, lib, mode, cost)
            by_cover[m.covered].append(_Candidate(m, cost, charges, m.flows(p)))
        for cover in sorted(by_cover):
            group = sorted(by_cover[cover], key=lambda c: (c.cost, c.match.mapping))
            cands += group[:1] if collapse else group
    cands.sort(key=lambda c: c.match.key)
    return cands, truncated


def decompose(
    g: Acg,
    lib: Optional[Library] = None,
    em: Optional[EnergyModel] = None,
    c: Optional[Constraints] = None,
    *,
    timeout: Optional[float] = DEFAULT_TIMEOUT,
    max_depth: Optional[int] = None,
    mode: str = "link",
    prune: bool = True,
    workers: int = 1,
    on_leaf: Optional[Callable[[list, list], None]] = None,
) -> Decomposition:
    """Minimum-cost feasible decomposition of ``g`` into library matches plus remainder.

    ``timeout`` bounds each isomorphism call; a truncated match list is
    reported through ``Decomposition.truncated`` and voids the optimality
    guarantee.  ``max_depth`` caps the number of matches.  ``on_leaf``
    receives ``(matches, remainder)`` for every complete decomposition the
    search evaluates.  Raises :class:`Infeasible` when no decomposition meets
    the constraints.
    """
    lib = lib or builtin_library()
    em = em or EnergyModel.unit()
    c = c or Constraints()
    if mode not in COST_MODES:
        raise ValueError(f"unknown cost mode {mode!r}")
    t0 = time.perf_counter()
    edges = sorted(g.edge_set)
    eidx = {e: i for i, e in enumerate(edges)}
    rem_cost = [_edge_remainder_cost(e, g, em) for e in edges]
    cands, truncated = _candidates(g, lib, em, mode, timeout, collapse=c.unlimited)
    if c.unlimited:
        # a match costlier than sending its edges to the remainder is never optimal
        cands = [cd for cd in cands
                 if cd.cost <= math.fsum(rem_cost[eidx[e]] for e in cd.match.covered) * (1 + 1e-12)]

    if not math.isinf(c.max_link_bandwidth):
        # a placement that overloads a channel on its own can never be used
        cands = [cd for cd in cands
                 if max(channel_demand(cd.paths, g).values(), default=0.0) <= c.max_link_bandwidth]
    if not c.unlimited:
        # under constraints the tables must realise exactly the routes that were checked
        cands = [cd for cd in cands if not route_conflicts(cd.paths)]

    chosen: list[int] = []
    nodes = leaves = 0
    # independent components are only separable when nothing couples them
    if c.unlimited and on_leaf is None and max_depth is None:
        jobs = []
        for comp_edges, comp_cands in _components(len(edges), [[eidx[e] for e in cd.match.covered] for cd in cands]):
            local = {e: i for i, e in enumerate(comp_edges)}
            prob = _Problem(
                rem_cost=[rem_cost[e] for e in comp_edges],
                cand_cost=[cands[k].cost for k in comp_cands],
                cand_edges=[[local[eidx[e]] for e in cands[k].match.covered] for k in comp_cands],
                cand_charge=[[cands[k].charges[e] for e in cands[k].match.covered] for k in comp_cands],
                cand_tag=[cands[k].match.primitive_id for k in comp_cands],
                prune=prune,
            )
            jobs.append((prob, comp_cands))
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_solve_component, [prob for prob, _ in jobs]))
        else:
            results = [_solve_component(prob) for prob, _ in jobs]
        for (_, comp_cands), (choice, n, lv) in zip(jobs, results):
            chosen += [comp_cands[i] for i in choice]
            nodes += n
            leaves += lv
        n_comp = len(jobs)
    else:
        prob = _Problem(
            rem_cost=rem_cost,
            cand_cost=[cd.cost for cd in cands],
            cand_edges=[[eidx[e] for e in cd.match.covered] for cd in cands],
            cand_charge=[[cd.charges[e] for e in cd.match.covered] for cd in cands],
            cand_tag=[cd.match.primitive_id for cd in cands],
            prune=prune, max_depth=max_depth,
        )
        check = load = None
        if not c.unlimited:
            lower = _demand_floor(g, c)
            if lower:
                everything = Decomposition((), tuple(edges), math.fsum(rem_cost))
                raise Infeasible(check_constraints(everything, g, c, lib) or lower)
            check = _leaf_checker(g, c, cands, edges)
            if not math.isinf(c.max_link_bandwidth):
                load = _Load(c.max_link_bandwidth,
                             [sorted(channel_demand(cd.paths, g).items()) for cd in cands],
                             [[(e, g.bandwidth(*e))] for e in edges])
        hook = None
        if on_leaf is not None:
            def hook(ch, rem):
                on_leaf([cands[k].match for k in ch], [edges[e] for e in rem])
        choice, nodes, leaves = _Search(prob, leaf_ok=check, on_leaf=hook, load=load).run()
        if choice is None:
            everything = Decomposition((), tuple(edges), math.fsum(rem_cost))
            raise Infeasible(check_constraints(everything, g, c, lib))
        chosen = list(choice)
        n_comp = 1

    chosen.sort()
    matches = tuple(cands[k].match for k in chosen)
    covered = set()
    for m in matches:
        covered.update(m.covered)
    remainder = tuple(e for e in edges if e not in covered)
    cost = math.fsum([cands[k].cost for k in chosen] + [rem_cost[eidx[e]] for e in remainder])
    stats = dict(candidates=len(cands), components=n_comp, nodes=nodes, leaves=leaves,
                 elapsed_s=time.perf_counter() - t0, mode=mode)
    return Decomposition(matches, remainder, cost, truncated, stats)


def _components(n_edges: int, cand_edges: list[list[int]]):
    parent = list(range(n_edges))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for es in cand_edges:
        for e in es[1:]:
            ra, rb = find(es[0]), find(e)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = defaultdict(list)
    for e in range(n_edges):
        groups[find(e)].append(e)
    cgroups: dict[int, list[int]] = defaultdict(list)
    for k, es in enumerate(cand_edges):
        cgroups[find(es[0])].append(k)
    return [(groups[r], cgroups.get(r, [])) for r in sorted(groups) if cgroups.get(r)]


def _demand_floor(g: Acg, c: Constraints) -> list[Violation]:
    """Violations every decomposition must have, found without searching.

    An edge needs its bandwidth on at least one channel.  Across a balanced
    cut, the link capacities must carry the ACG bandwidth crossing it in each
    direction, so half the two-way crossing bandwidth bounds the cut.
    """
    out = [Violation("link", e.pair, e.bandwidth, c.max_link_bandwidth)
           for e in g.edges if e.bandwidth > c.max_link_bandwidth]
    if not math.isinf(c.max_bisection_bandwidth) and len(g) >= 2:
        half: dict[Pair, float] = defaultdict(float)
        for e in g.edges:
            half[_link(*e.pair)] += e.bandwidth / 2
        cut = min_bisection(g.nodes, half)
        if cut.bandwidth > c.max_bisection_bandwidth:
            out.append(Violation("bisection", cut.part, cut.bandwidth, c.max_bisection_bandwidth))
    return out


def _leaf_checker(g: Acg, c: Constraints, cands: list[_Candidate], edges: list[Pair]):
    """Leaf test under constraints: tables must follow every chosen route, then the caps must hold."""
    cand_demand = [channel_demand(cd.paths, g) for cd in cands]
    cand_hops = [next_hop_map(cd.paths) for cd in cands]
    cache: dict[tuple, bool] = {}

    def ok(chosen, rem_edges) -> bool:
        hops: dict[tuple, int] = {}
        for k in chosen:
            for u, row in cand_hops[k].items():
                for t, v in row.items():
                    if hops.setdefault((u, t), v) != v:
                        return False
        for e in rem_edges:
            s, t = edges[e]
            if hops.setdefault((s, t), t) != t:
                return False
        demand: dict[Pair, float] = defaultdict(float)
        for k in chosen:
            for ch, bw in cand_demand[k].items():
                demand[ch] += bw
        for e in rem_edges:
            demand[edges[e]] += g.bandwidth(*edges[e])
        if any(bw > c.max_link_bandwidth for bw in demand.values()):
            return False
        if math.isinf(c.max_bisection_bandwidth):
            return True
        sig = tuple(sorted(link_capacities(demand).items()))
        if sig not in cache:
            cache[sig] = not _check_bisection(g.nodes, demand, c)
        return cache[sig]

    return ok
