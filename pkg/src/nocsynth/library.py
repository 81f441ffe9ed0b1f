"""Communication primitives: what the decomposer looks for and what gets built.

Each primitive pairs a directed *representation* graph (the traffic pattern
searched for in an ACG) with an undirected *implementation* graph (the links
instantiated when the pattern is matched), a round schedule in which every
vertex takes part in at most one exchange, and a route for every
representation edge over the implementation links.

Library file records::

    prim <id> <name> <k> [kind]
    rep <s> <d>
    impl <a> <b>
    round <i> <a> <b>
    route <s> <d> <v1> ... <vn>
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence, Tuple

from .graph import Pair, adjacency_diameter

KINDS = ("gossip", "broadcast", "loop", "path", "custom")


class LibraryError(ValueError):
    pass


def _link(a: int, b: int) -> Pair:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class CommPrimitive:
    id: int
    name: str
    k: int
    kind: str
    representation: Tuple[Pair, ...]
    implementation: Tuple[Pair, ...]
    schedule: Tuple[Tuple[Pair, ...], ...]
    routes: Tuple[Tuple[Pair, Tuple[int, ...]], ...]
    root: Optional[int] = None
    _route_map: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "representation", tuple(sorted(self.representation)))
        object.__setattr__(self, "implementation", tuple(sorted({_link(a, b) for a, b in self.implementation})))
        object.__setattr__(self, "schedule", tuple(tuple(tuple(p) for p in rnd) for rnd in self.schedule))
        routes = tuple(sorted((tuple(k), tuple(v)) for k, v in dict(self.routes).items()))
        object.__setattr__(self, "routes", routes)
        object.__setattr__(self, "_route_map", dict(routes))

    @property
    def route_map(self) -> Mapping[Pair, Tuple[int, ...]]:
        return self._route_map

    def adjacency(self) -> dict[int, set]:
        adj = {v: set() for v in range(1, self.k + 1)}
        for a, b in self.implementation:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def implementation_diameter(self) -> float:
        return adjacency_diameter(self.adjacency())

    def with_routes(self, overrides: Mapping[Pair, Sequence[int]]) -> "CommPrimitive":
        routes = dict(self._route_map)
        routes.update({tuple(k): tuple(v) for k, v in overrides.items()})
        return replace(self, routes=tuple(routes.items()))


def route_lookup(p: CommPrimitive, src: int, dst: int) -> Tuple[int, ...]:
    if (src, dst) not in set(p.representation):
        raise LibraryError(f"{p.name}: ({src},{dst}) is not a representation edge")
    return p.route_map[(src, dst)]


def validate_primitive(p: CommPrimitive) -> list[str]:
    """Return every violated invariant as a readable message (empty when valid)."""
    problems: list[str] = []
    verts = set(range(1, p.k + 1))
    if p.kind not in KINDS:
        problems.append(f"unknown kind {p.kind!r}")
    for s, d in p.representation:
        if s not in verts or d not in verts or s == d:
            problems.append(f"bad representation edge ({s},{d})")
    links = set(p.implementation)
    for a, b in links:
        if a not in verts or b not in verts or a == b:
            problems.append(f"bad implementation link ({a},{b})")
    if problems:
        return problems

    diam = p.implementation_diameter()
    for s, d in p.representation:
        if (s, d) not in p.route_map:
            problems.append(f"no route for representation edge ({s},{d})")
    for (s, d), path in p.routes:
        if not path or path[0] != s or path[-1] != d:
            problems.append(f"route ({s},{d}) = {list(path)} does not run from {s} to {d}")
            continue
        if len(set(path)) != len(path):
            problems.append(f"route ({s},{d}) = {list(path)} repeats a vertex")
        for a, b in zip(path, path[1:]):
            if _link(a, b) not in links:
                problems.append(f"route ({s},{d}) uses missing link {a}-{b}")
        if len(path) - 1 > diam:
            problems.append(f"route ({s},{d}) has {len(path) - 1} hops, implementation diameter is {diam}")

    for i, rnd in enumerate(p.schedule, start=1):
        busy: dict[int, int] = {}
        for a, b in rnd:
            for v in (a, b):
                busy[v] = busy.get(v, 0) + 1
            if _link(a, b) not in links:
                problems.append(f"round {i}: pair ({a},{b}) is not an implementation link")
        for v, n in sorted(busy.items()):
            if n > 1:
                problems.append(f"round {i}: vertex {v} in {n} transactions")

    optimal = math.ceil(math.log2(p.k)) if p.k > 1 else 0
    if p.kind == "gossip":
        know = replay_gossip(p)
        if any(know[v] != verts for v in verts):
            problems.append("gossip schedule does not complete")
        if len(p.schedule) != optimal:
            problems.append(f"gossip schedule has {len(p.schedule)} rounds, optimum is {optimal}")
    elif p.kind == "broadcast":
        root = p.root if p.root is not None else 1
        informed = replay_broadcast(p, root)
        if informed != verts:
            problems.append(f"broadcast from {root} misses {sorted(verts - informed)}")
        if len(p.schedule) != optimal:
            problems.append(f"broadcast schedule has {len(p.schedule)} rounds, optimum is {optimal}")
    elif p.kind in ("loop", "path"):
        scheduled = {_link(a, b) for rnd in p.schedule for a, b in rnd}
        for s, d in p.representation:
            if _link(s, d) not in scheduled:
                problems.append(f"representation edge ({s},{d}) never scheduled")
    return problems


def replay_gossip(p: CommPrimitive) -> dict[int, set]:
    know = {v: {v} for v in range(1, p.k + 1)}
    for rnd in p.schedule:
        merged = [(a, b, know[a] | know[b]) for a, b in rnd]
        for a, b, m in merged:
            know[a] = set(m)
            know[b] = set(m)
    return know


def replay_broadcast(p: CommPrimitive, root: int) -> set:
    informed = {root}
    for rnd in p.schedule:
        new = set()
        for a, b in rnd:
            if a in informed or b in informed:
                new.update((a, b))
        informed |= new
    return informed


# -- builtin library -------------------------------------------------------------

def _cycle_links(k: int) -> list[Pair]:
    return [(i, i % k + 1) for i in range(1, k + 1)]


def _loop(pid: int, k: int, schedule) -> CommPrimitive:
    rep = _cycle_links(k)
    return CommPrimitive(
        id=pid, name=f"L{k}", k=k, kind="loop",
        representation=rep, implementation=rep, schedule=schedule,
        routes=tuple(((s, d), (s, d)) for s, d in rep),
    )


def _path(pid: int, k: int, schedule) -> CommPrimitive:
    rep = [(i, i + 1) for i in range(1, k)]
    return CommPrimitive(
        id=pid, name=f"P{k}", k=k, kind="path",
        representation=rep, implementation=rep, schedule=schedule,
        routes=tuple(((s, d), (s, d)) for s, d in rep),
    )


def mgg4() -> CommPrimitive:
    # 4-cycle 1-2-4-3-1; rounds (1,3),(2,4) then (1,2),(3,4)
    rep = [(a, b) for a in range(1, 5) for b in range(1, 5) if a != b]
    impl = [(1, 2), (2, 4), (4, 3), (3, 1)]
    routes = {(a, b): (a, b) for a, b in rep if _link(a, b) in {_link(*l) for l in impl}}
    routes.update({
        (1, 4): (1, 3, 4), (4, 1): (4, 3, 1),
        (2, 3): (2, 4, 3), (3, 2): (3, 4, 2),
    })
    return CommPrimitive(
        id=1, name="MGG4", k=4, kind="gossip",
        representation=rep, implementation=impl,
        schedule=(((1, 3), (2, 4)), ((1, 2), (3, 4))),
        routes=tuple(routes.items()),
    )


def builtin_library() -> "Library":
    g123 = CommPrimitive(
        id=2, name="G123", k=4, kind="broadcast", root=1,
        representation=[(1, 2), (1, 3), (1, 4)],
        implementation=[(1, 2), (2, 4), (4, 3), (3, 1)],
        schedule=(((1, 2),), ((1, 3), (2, 4))),
        routes=(((1, 2), (1, 2)), ((1, 3), (1, 3)), ((1, 4), (1, 2, 4))),
    )
    g124 = CommPrimitive(
        id=3, name="G124", k=5, kind="broadcast", root=1,
        representation=[(1, 2), (1, 3), (1, 4), (1, 5)],
        implementation=_cycle_links(5),
        schedule=(((1, 2),), ((1, 5), (2, 3)), ((5, 4),)),
        routes=(((1, 2), (1, 2)), ((1, 3), (1, 2, 3)), ((1, 4), (1, 5, 4)), ((1, 5), (1, 5))),
    )
    prims = [
        mgg4(),
        g123,
        g124,
        _loop(4, 3, (((1, 2),), ((2, 3),), ((3, 1),))),
        _loop(5, 4, (((1, 2), (3, 4)), ((2, 3), (4, 1)))),
        _loop(6, 5, (((1, 2), (3, 4)), ((2, 3), (4, 5)), ((5, 1),))),
        _path(7, 3, (((1, 2),), ((2, 3),))),
        _path(8, 4, (((1, 2), (3, 4)), ((2, 3),))),
    ]
    return Library(tuple(prims))


@dataclass(frozen=True)
class Library:
    primitives: Tuple[CommPrimitive, ...]

    def __post_init__(self):
        ids = [p.id for p in self.primitives]
        if ids != list(range(1, len(ids) + 1)):
            raise LibraryError(f"primitive ids must run 1..n in listing order, got {ids}")
        names = [p.name for p in self.primitives]
        if len(set(names)) != len(names):
            raise LibraryError("primitive names must be unique")

    def __iter__(self):
        return iter(self.primitives)

    def __len__(self) -> int:
        return len(self.primitives)

    def by_id(self, pid: int) -> CommPrimitive:
        return self.primitives[pid - 1]

    def by_name(self, name: str) -> CommPrimitive:
        for p in self.primitives:
            if p.name == name:
                return p
        raise KeyError(name)

    def max_diameter(self) -> float:
        return max((p.implementation_diameter() for p in self.primitives), default=0)

    def digest(self) -> str:
        return hashlib.sha256(serialize_library(self).encode()).hexdigest()


# -- library file ------------------------------------------------------------------

def _guess_kind(name: str) -> str:
    upper = name.upper()
    if upper.startswith("MGG"):
        return "gossip"
    if upper.startswith(("MBG", "G")):
        return "broadcast"
    if upper.startswith("L"):
        return "loop"
    if upper.startswith("P"):
        return "path"
    return "custom"


def parse_library(text: str) -> Library:
    prims: list[dict] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            nums = [int(t) for t in tok[1:]] if tok[0] != "prim" else None
        except ValueError:
            raise LibraryError(f"line {lineno}: expected integers") from None
        if tok[0] == "prim":
            if len(tok) not in (4, 5):
                raise LibraryError(f"line {lineno}: expected 'prim <id> <name> <k> [kind]'")
            kind = tok[4] if len(tok) == 5 else _guess_kind(tok[2])
            prims.append(dict(id=int(tok[1]), name=tok[2], k=int(tok[3]), kind=kind,
                              rep=[], impl=[], rounds={}, routes={}))
            continue
        if not prims:
            raise LibraryError(f"line {lineno}: record before any 'prim'")
        cur = prims[-1]
        if tok[0] == "rep" and len(nums) == 2:
            cur["rep"].append(tuple(nums))
        elif tok[0] == "impl" and len(nums) == 2:
            cur["impl"].append(tuple(nums))
        elif tok[0] == "round" and len(nums) == 3:
            cur["rounds"].setdefault(nums[0], []).append((nums[1], nums[2]))
        elif tok[0] == "route" and len(nums) >= 3:
            cur["routes"][(nums[0], nums[1])] = tuple(nums[2:])
        elif tok[0] == "root" and len(nums) == 1:
            cur["root"] = nums[0]
        else:
            raise LibraryError(f"line {lineno}: malformed record {line!r}")
    out = []
    for d in prims:
        rounds = [tuple(d["rounds"][i]) for i in sorted(d["rounds"])]
        root = d.get("root", 1 if d["kind"] == "broadcast" else None)
        out.append(CommPrimitive(
            id=d["id"], name=d["name"], k=d["k"], kind=d["kind"],
            representation=d["rep"], implementation=d["impl"],
            schedule=tuple(rounds), routes=tuple(d["routes"].items()), root=root,
        ))
    return Library(tuple(out))


def serialize_library(lib: Library) -> str:
    lines = []
    for p in lib:
        lines.append(f"prim {p.id} {p.name} {p.k} {p.kind}")
        if p.root is not None:
            lines.append(f"root {p.root}")
        lines += [f"rep {s} {d}" for s, d in p.representation]
        lines += [f"impl {a} {b}" for a, b in p.implementation]
        for i, rnd in enumerate(p.schedule, start=1):
            lines += [f"round {i} {a} {b}" for a, b in rnd]
        lines += [f"route {s} {d} " + " ".join(map(str, path)) for (s, d), path in p.routes]
    return "\n".join(lines) + "\n"


def load_library(path: Optional[str]) -> Library:
    if path is None:
        return builtin_library()
    with open(path) as fh:
        return parse_library(fh.read())


def validate_library(lib: Iterable[CommPrimitive]) -> dict[str, list[str]]:
    return {p.name: validate_primitive(p) for p in lib}
