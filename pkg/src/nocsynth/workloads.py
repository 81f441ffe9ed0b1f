"""Benchmark ACGs: the AES block cipher, planted-primitive graphs and random graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .graph import Acg, Edge, Pair
from .library import CommPrimitive, Library, builtin_library

AES_COLUMNS = ((1, 5, 9, 13), (2, 6, 10, 14), (3, 7, 11, 15), (4, 8, 12, 16))
AES_ROW_LOOPS = ((5, 6, 7, 8), (13, 14, 15, 16))
AES_ROW3 = ((9, 11), (11, 9), (10, 12), (12, 10))


def grid_positions(n: int, cols: Optional[int] = None, spacing: float = 1.0) -> dict[int, tuple]:
    """Row-major placement of nodes 1..n on a grid."""
    cols = cols or max(1, math.ceil(math.sqrt(n)))
    return {i + 1: ((i % cols) * spacing, (i // cols) * spacing) for i in range(n)}


def aes_acg(volume: float = 8, bandwidth: float = 1) -> Acg:
    """16 byte processors on a 4x4 grid; MixColumns within columns, ShiftRows within rows."""
    pairs: list[Pair] = []
    for col in AES_COLUMNS:
        pairs += [(a, b) for a in col for b in col if a != b]
    for row in AES_ROW_LOOPS:
        pairs += [(row[i], row[(i + 1) % 4]) for i in range(4)]
    pairs += list(AES_ROW3)
    return Acg(grid_positions(16, 4), [Edge(s, d, volume, bandwidth) for s, d in sorted(pairs)])


@dataclass
class Planted:
    """A generated ACG together with the primitive copies placed in it."""

    acg: Acg
    truth: list = field(default_factory=list)  # (primitive_id, mapping) per planted copy
    noise_edges: list = field(default_factory=list)

    def log(self, lib: Library) -> str:
        lines = [f"{pid}: {lib.by_id(pid).name}, Mapping: "
                 + ", ".join(f"({i} {v})" for i, v in enumerate(mp, start=1))
                 for pid, mp in self.truth]
        lines += [f"noise {s} {d}" for s, d in self.noise_edges]
        return "\n".join(lines) + ("\n" if lines else "")


MixEntry = Union[str, int, tuple]


def _resolve(entry: MixEntry, lib: Library) -> tuple[CommPrimitive, Optional[tuple]]:
    pinned = None
    if isinstance(entry, tuple):
        entry, pinned = entry
        pinned = tuple(int(v) for v in pinned)
    p = lib.by_id(entry) if isinstance(entry, int) else lib.by_name(entry)
    if pinned is not None and len(pinned) != p.k:
        raise ValueError(f"{p.name} needs {p.k} nodes, got {pinned}")
    return p, pinned


def planted_workload(
    seed: int,
    n: int,
    mix: Sequence[MixEntry] = ("MGG4",),
    noise: float = 0.0,
    overlap: bool = False,
    volume: float = 1,
    bandwidth: float = 1,
    lib: Optional[Library] = None,
    attempts: int = 200,
) -> Planted:
    """Plant primitive representation copies on random node subsets.

    ``mix`` entries are primitive names or ids, optionally pinned to nodes as
    ``(name, (v1, .., vk))``.  Copies are vertex-disjoint unless ``overlap``,
    in which case they may share nodes but never edges.  ``noise`` adds
    ``round(noise * planted_edges)`` extra random edges.
    """
    if n < 4:
        raise ValueError("planted workloads need n >= 4")
    lib = lib or builtin_library()
    rng = np.random.default_rng(seed)
    plan = [_resolve(e, lib) for e in mix]
    if not overlap and sum(p.k for p, _ in plan) > n:
        raise ValueError(f"mix needs {sum(p.k for p, _ in plan)} disjoint nodes but n = {n}")
    edges: set[Pair] = set()
    used: set[int] = set()
    truth = []
    # pinned copies first so random ones avoid them
    for p, mapping in sorted(plan, key=lambda x: x[1] is None):
        for _ in range(attempts):
            if mapping is None:
                pool = [v for v in range(1, n + 1) if overlap or v not in used]
                if len(pool) < p.k:
                    raise ValueError("mix infeasible for n")
                cand = tuple(int(v) for v in rng.choice(pool, size=p.k, replace=False))
            else:
                cand = mapping
            new = {(cand[a - 1], cand[b - 1]) for a, b in p.representation}
            if not (new & edges) and (overlap or not (set(cand) & used)):
                break
            if mapping is not None:
                raise ValueError(f"pinned {p.name} on {mapping} collides with another copy")
        else:
            raise ValueError(f"could not place {p.name} after {attempts} attempts")
        if max(cand) > n:
            raise ValueError(f"pinned node out of range in {cand}")
        edges |= new
        used |= set(cand)
        truth.append((p.id, cand))
    noise_edges = []
    target = int(round(noise * len(edges)))
    free = [(s, d) for s in range(1, n + 1) for d in range(1, n + 1) if s != d and (s, d) not in edges]
    if target > len(free):
        raise ValueError("noise exceeds the free edge count")
    if target:
        pick = rng.choice(len(free), size=target, replace=False)
        noise_edges = sorted(free[i] for i in pick)
        edges |= set(noise_edges)
    g = Acg(grid_positions(n), [Edge(s, d, volume, bandwidth) for s, d in sorted(edges)])
    return Planted(g, truth, noise_edges)


def planted_acg(seed: int, n: int, mix: Sequence[MixEntry] = ("MGG4",), **kw) -> Acg:
    return planted_workload(seed, n, mix, **kw).acg


def random_acg(seed: int, n: int, density: float, volume: float = 1, bandwidth: float = 1) -> Acg:
    """Each ordered pair becomes an edge with probability ``density``."""
    if not 0 <= density <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    draws = rng.random((n, n))
    edges = [Edge(s + 1, d + 1, volume, bandwidth)
             for s in range(n) for d in range(n) if s != d and draws[s, d] < density]
    return Acg(grid_positions(n), edges)


def bench_mix(n: int) -> list[str]:
    """Primitive mix filling about two thirds of n nodes, cycling through the library."""
    names = ["MGG4", "G123", "L4", "P3", "G124", "L3", "P4", "L5"]
    sizes = {"MGG4": 4, "G123": 4, "G124": 5, "L3": 3, "L4": 4, "L5": 5, "P3": 3, "P4": 4}
    budget = max(3, (2 * n) // 3) if n >= 4 else 0
    # tiny graphs start at the first primitive that fits so noise has room
    i = next((j for j, name in enumerate(names) if sizes[name] <= budget), 0)
    out, total = [], 0
    while budget and total + sizes[names[i % len(names)]] <= budget:
        out.append(names[i % len(names)])
        total += sizes[names[i % len(names)]]
        i += 1
    return out


def bench_instance(seed: int, n: int, noise: float = 0.2) -> Acg:
    return planted_acg(seed, n, bench_mix(n), noise=noise, overlap=True)


def traffic_from_acg(g: Acg, rounds: int = 1, flit_bits: int = 32):
    """One packet per ACG edge per round; rounds are barrier separated."""
    from .simulator import Packet, Traffic

    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if flit_bits <= 0:
        raise ValueError("flit_bits must be positive")
    packets = []
    for r in range(rounds):
        for e in g.edges:
            packets.append(Packet(len(packets), r, e.src, e.dst, e.volume))
    return Traffic(tuple(packets), mode="acg-rounds")
