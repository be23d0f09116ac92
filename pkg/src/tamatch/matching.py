"""Exact offline maximum matching on graphs implied by type histograms."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import InvalidInput, Matching, TypeHistogram, VertexType

FREE = -1


@dataclass(frozen=True)
class ImpliedGraph:
    """``n`` offline vertices and one online vertex per entry of ``online_types``."""

    n: int
    online_types: tuple[VertexType, ...]

    def __post_init__(self):
        object.__setattr__(self, "online_types", tuple(self.online_types))
        for t in self.online_types:
            if t.max_index() >= self.n:
                raise InvalidInput(f"type {t} out of range for n={self.n}")

    @classmethod
    def from_histogram(cls, h: TypeHistogram) -> "ImpliedGraph":
        return cls(h.n, tuple(h.expand()))


def hopcroft_karp(adj: Sequence[Sequence[int]], n_right: int, capacity: Sequence[int] | None = None) -> list[list[int]]:
    """Maximum bipartite b-matching where left node ``v`` may take ``capacity[v]`` partners.

    Returns, per left node, the sorted offline vertices assigned to it.  With
    unit capacities this is plain Hopcroft-Karp; identical online vertices can
    be collapsed into one left node with a multiplicity, which keeps high-degree
    types cheap.  Greedy warm start in ascending-degree order, then
    shortest-augmenting-path phases with an iterative DFS.
    """
    n_left = len(adj)
    cap = [1] * n_left if capacity is None else list(capacity)
    load = [0] * n_left
    match_r = [FREE] * n_right
    for v in sorted(range(n_left), key=lambda i: (len(adj[i]), i)):
        for u in adj[v]:
            if load[v] == cap[v]:
                break
            if match_r[u] == FREE:
                match_r[u] = v
                load[v] += 1

    while True:
        dist = [-1] * n_left
        queue = deque()
        for v in range(n_left):
            if load[v] < cap[v] and adj[v]:
                dist[v] = 0
                queue.append(v)
        found = False
        while queue:
            v = queue.popleft()
            dv = dist[v] + 1
            for u in adj[v]:
                w = match_r[u]
                if w == FREE:
                    found = True
                elif dist[w] == -1:
                    dist[w] = dv
                    queue.append(w)
        if not found:
            break

        cursor = [0] * n_left
        augmented = 0
        for s in range(n_left):
            if dist[s] != 0:
                continue
            while load[s] < cap[s] and dist[s] == 0:
                stack = [s]
                path_u: list[int] = []
                while stack:
                    v = stack[-1]
                    nbrs = adj[v]
                    step = None
                    while cursor[v] < len(nbrs):
                        u = nbrs[cursor[v]]
                        cursor[v] += 1
                        w = match_r[u]
                        if w == FREE or (w != v and dist[w] == dist[v] + 1):
                            step = (u, w)
                            break
                    if step is None:
                        dist[v] = -2  # dead end for the rest of this phase
                        stack.pop()
                        if path_u:
                            path_u.pop()
                        continue
                    u, w = step
                    path_u.append(u)
                    if w == FREE:
                        load[s] += 1
                        for vv, uu in zip(stack, path_u):
                            match_r[uu] = vv
                        augmented += 1
                        break
                    stack.append(w)
                else:
                    break
        if augmented == 0:
            break

    partners: list[list[int]] = [[] for _ in range(n_left)]
    for u, v in enumerate(match_r):
        if v != FREE:
            partners[v].append(u)
    return partners


def _grouped(online_types: Sequence[VertexType]) -> tuple[list[VertexType], list[list[int]]]:
    keys: list[VertexType] = []
    slots: dict[VertexType, list[int]] = {}
    for v, t in enumerate(online_types):
        if t not in slots:
            slots[t] = []
            keys.append(t)
        slots[t].append(v)
    return keys, [slots[t] for t in keys]


def max_matching(g: ImpliedGraph) -> Matching:
    """Maximum-cardinality matching of ``g``, deterministic for a fixed input order."""
    keys, slots = _grouped(g.online_types)
    partners = hopcroft_karp([t.neighbors for t in keys], g.n, [len(s) for s in slots])
    pairs: dict[int, int] = {}
    for vs, us in zip(slots, partners):
        pairs.update(zip(vs, us))
    return Matching(dict(sorted(pairs.items())))


def max_matching_size(h: TypeHistogram) -> int:
    return max_matching(ImpliedGraph.from_histogram(h)).size


def brute_force_matching_size(n: int, online_types: Sequence[VertexType]) -> int:
    """Exhaustive search over all injective partial assignments (tiny graphs only)."""
    adj = [t.neighbors for t in online_types]
    best = 0

    def go(i: int, used: int, size: int) -> None:
        nonlocal best
        if size + (len(adj) - i) <= best:
            return
        if i == len(adj):
            best = max(best, size)
            return
        for u in adj[i]:
            if not used >> u & 1:
                go(i + 1, used | (1 << u), size + 1)
        go(i + 1, used, size)

    go(0, 0, 0)
    return best


def competitive_ratio(m: int, n_star: int) -> Fraction:
    """Matches achieved over the offline optimum."""
    if n_star <= 0:
        raise InvalidInput("offline optimum must be positive")
    if not 0 <= m <= n_star:
        raise InvalidInput(f"match count {m} outside [0, {n_star}]")
    return Fraction(m, n_star)


def postfix_optimum(g: ImpliedGraph, consumed_online: Iterable[int], consumed_offline: Iterable[int]) -> int:
    """Maximum matching among unconsumed online vertices and unconsumed offline vertices."""
    gone_v = set(consumed_online)
    gone_u = set(consumed_offline)
    rest = [
        VertexType(u for u in t.neighbors if u not in gone_u)
        for v, t in enumerate(g.online_types)
        if v not in gone_v
    ]
    keys, slots = _grouped(rest)
    partners = hopcroft_karp([t.neighbors for t in keys], g.n, [len(s) for s in slots])
    return sum(len(p) for p in partners)
