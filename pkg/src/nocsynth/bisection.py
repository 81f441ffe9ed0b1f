"""Minimum balanced cut of a capacitated undirected link graph."""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Mapping, NamedTuple, Tuple

import numpy as np

EXACT_LIMIT = 20


class Bisection(NamedTuple):
    bandwidth: float
    part: Tuple[int, ...]  # one side of the minimising cut
    exact: bool


def min_bisection(nodes: Iterable[int], capacity: Mapping[Tuple[int, int], float], seed: int = 0) -> Bisection:
    """Minimum over balanced bipartitions (sizes floor(n/2), ceil(n/2)) of crossing capacity.

    Exhaustive for up to ``EXACT_LIMIT`` nodes, Kernighan-Lin with restarts above.
    """
    nodes = sorted(nodes)
    n = len(nodes)
    if n < 2:
        raise ValueError("bisection needs at least two nodes")
    idx = {v: i for i, v in enumerate(nodes)}
    w = np.zeros((n, n))
    for (a, b), c in capacity.items():
        i, j = idx[a], idx[b]
        w[i, j] += c
        w[j, i] += c
    if n <= EXACT_LIMIT:
        return _exact(nodes, w)
    return _kernighan_lin(nodes, capacity, w, seed)


def _cut_weights(sides: np.ndarray, w: np.ndarray) -> np.ndarray:
    x = sides.astype(float)
    return ((x @ w) * (1.0 - x)).sum(axis=1)


def _exact(nodes: list[int], w: np.ndarray) -> Bisection:
    n = len(nodes)
    half = n // 2
    best_val, best_part = math.inf, None
    # even n: pin node 0 to one side, the mirror cut is identical
    if n % 2 == 0:
        combos = (((0,) + c) for c in itertools.combinations(range(1, n), half - 1))
    else:
        combos = itertools.combinations(range(n), half)
    chunk = 20000
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        sides = np.zeros((len(block), n), dtype=bool)
        rows = np.repeat(np.arange(len(block)), half)
        sides[rows, np.asarray(block).ravel()] = True
        cuts = _cut_weights(sides, w)
        i = int(np.argmin(cuts))
        if cuts[i] < best_val - 1e-12:
            best_val, best_part = float(cuts[i]), block[i]
    return Bisection(best_val, tuple(nodes[i] for i in best_part), True)


def _kernighan_lin(nodes, capacity, w, seed) -> Bisection:
    import networkx as nx
    from networkx.algorithms.community import kernighan_lin_bisection

    g = nx.Graph()
    g.add_nodes_from(nodes)
    for (a, b), c in capacity.items():
        if g.has_edge(a, b):
            g[a][b]["weight"] += c
        else:
            g.add_edge(a, b, weight=c)
    n = len(nodes)
    half = n // 2
    best = None
    for r in range(8):
        rng = np.random.default_rng(seed + r)
        perm = [nodes[i] for i in rng.permutation(n)]
        a, b = kernighan_lin_bisection(g, partition=(set(perm[:half]), set(perm[half:])),
                                       weight="weight", seed=seed + r)
        side = a if len(a) == half else b
        x = np.array([[v in side for v in nodes]])
        val = float(_cut_weights(x, w)[0])
        cand = (val, tuple(sorted(side)))
        if best is None or cand < best:
            best = cand
    return Bisection(best[0], best[1], False)
