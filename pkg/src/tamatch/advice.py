"""Advice bundles and the transformations that make imperfect advice usable.

* :func:`patch_advice` completes the advice graph to a perfect matching with
  one dummy label adjacent to the unmatched offline vertices.
* :func:`bucket_coarsen` merges low-count types under the intersection of
  their neighbor sets, so any proposed match stays a real edge.
* :func:`group_for_testing` partitions labels into a few test buckets, which
  shrinks the domain the identity tester has to cover.
* :func:`remap_offline` (max flow) and :func:`remap_online` (greedy) reinterpret
  arrivals as subset types of the advice.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping

import numpy as np

from .core import ReducedDomain, TypeHistogram, VertexType, histogram_vector
from .matching import hopcroft_karp

NEW_TAG = "new"


@dataclass(frozen=True)
class AdviceBundle:
    """Advice histogram with a fixed maximum matching of its implied graph.

    ``slots[label]`` lists the offline partner of every online slot of that
    label (``None`` for slots left unmatched), matched slots first.
    """

    histogram: TypeHistogram
    slots: Mapping[VertexType, tuple[int | None, ...]]
    n_hat: int
    groups: Mapping[VertexType, VertexType] | None = None
    patch_pool: frozenset = frozenset()

    @classmethod
    def from_histogram(cls, h: TypeHistogram) -> "AdviceBundle":
        labels = [t for t, _ in h.sorted_items()]
        partners = hopcroft_karp([t.neighbors for t in labels], h.n, [h[t] for t in labels])
        slots = {}
        for t, us in zip(labels, partners):
            slots[t] = tuple(us) + (None,) * (h[t] - len(us))
        return cls(h, slots, sum(len(us) for us in partners))

    @property
    def n(self) -> int:
        return self.histogram.n

    @property
    def r_hat(self) -> int:
        return len(self.histogram)

    @property
    def support(self) -> frozenset:
        return self.histogram.support

    def matched_count(self, label: VertexType) -> int:
        return sum(1 for u in self.slots[label] if u is not None)

    def domain(self) -> ReducedDomain:
        return ReducedDomain(self.histogram, self.groups)

    def q_vector(self, domain: ReducedDomain | None = None) -> np.ndarray:
        return histogram_vector(self.histogram, domain or self.domain())

    def check(self) -> None:
        """Assert that the stored matching is a valid matching of size ``n_hat``."""
        used: set[int] = set()
        size = 0
        for t, us in self.slots.items():
            assert len(us) == self.histogram[t]
            for u in us:
                if u is None:
                    continue
                assert u in t and u not in used
                used.add(u)
                size += 1
        assert size == self.n_hat


@dataclass(frozen=True)
class PatchRecord:
    original_n_hat: int
    k: int
    new_label: VertexType | None
    unmatched_offline: tuple[int, ...]
    unmatched_slots: tuple[tuple[VertexType, int], ...]
    dropped_labels: tuple[VertexType, ...] = ()

    @property
    def empty(self) -> bool:
        return self.k == 0


def patch_advice(bundle: AdviceBundle) -> tuple[AdviceBundle, PatchRecord]:
    """Replace the ``k = n - n_hat`` unmatched slots by ``k`` slots of a dummy label.

    The dummy label is adjacent to exactly the ``k`` offline vertices left
    unmatched by the advice matching, so the patched graph has a perfect
    matching and ``L1(c_hat, c_hat') = 2k``.  A label whose slots were all
    unmatched disappears from the support.
    """
    n = bundle.n
    k = n - bundle.n_hat
    if k == 0:
        return bundle, PatchRecord(bundle.n_hat, 0, None, (), ())
    used = {u for us in bundle.slots.values() for u in us if u is not None}
    a_u = tuple(u for u in range(n) if u not in used)
    new_label = VertexType(a_u, tag=NEW_TAG)
    counts: dict[VertexType, int] = {}
    slots: dict[VertexType, tuple[int | None, ...]] = {}
    a_v: list[tuple[VertexType, int]] = []
    dropped: list[VertexType] = []
    for t, us in sorted(bundle.slots.items()):
        kept = tuple(u for u in us if u is not None)
        a_v.extend((t, i) for i, u in enumerate(us) if u is None)
        if kept:
            counts[t] = len(kept)
            slots[t] = kept
        else:
            dropped.append(t)
    counts[new_label] = k
    slots[new_label] = a_u
    groups = None
    if bundle.groups is not None:
        groups = {t: g for t, g in bundle.groups.items() if t in counts}
        groups[new_label] = new_label
    patched = AdviceBundle(TypeHistogram(counts, n), slots, n, groups, frozenset(a_u))
    return patched, PatchRecord(bundle.n_hat, k, new_label, a_u, tuple(a_v), tuple(dropped))


# -- intersection bucketing ----------------------------------------------

@dataclass(frozen=True)
class CoarsenResult:
    bundle: AdviceBundle
    members: Mapping[VertexType, tuple[VertexType, ...]]
    reached_target: bool
    merges: int


def bucket_coarsen(
    bundle: AdviceBundle, target_r: int | None = None, count_threshold: int | None = None
) -> CoarsenResult:
    """Greedily merge low-count types; a bucket's label is the intersection of its members.

    The smallest-count bucket is merged into the bucket that loses the fewest
    offline vertices (size of the symmetric difference of the two labels).
    Merges with an empty intersection are never made; a bucket with no legal
    partner is frozen.  Stops once the support is at most ``target_r`` or every
    active bucket has count at least ``count_threshold``.
    """
    if target_r is None and count_threshold is None:
        raise ValueError("give target_r or count_threshold")
    if target_r is not None and target_r < 1:
        raise ValueError("target_r must be >= 1")
    h = bundle.histogram

    def done(active: int) -> bool:
        return target_r is not None and active <= target_r

    labels: dict[int, frozenset] = {}
    counts: dict[int, int] = {}
    members: dict[int, list[VertexType]] = {}
    by_vertex: dict[int, set[int]] = {}
    heap: list[tuple[int, tuple, int]] = []
    for i, (t, c) in enumerate(h.sorted_items()):
        labels[i], counts[i], members[i] = t.as_set, c, [t]
        for u in t.neighbors:
            by_vertex.setdefault(u, set()).add(i)
        heap.append((c, t.neighbors, i))
    heapq.heapify(heap)

    merges = 0
    while heap and not done(len(labels)):
        c, _, b = heapq.heappop(heap)
        if b not in labels or counts[b] != c:
            continue  # stale entry
        if count_threshold is not None and target_r is None and c >= count_threshold:
            break
        lb = labels[b]
        cands: set[int] = set()
        for u in lb:
            cands |= by_vertex[u]
        cands.discard(b)
        if not cands:
            continue  # frozen: no partner shares a vertex
        best = min(
            cands,
            key=lambda j: (len(lb | labels[j]) - len(lb & labels[j]), counts[j], tuple(sorted(labels[j]))),
        )
        new_label = lb & labels[best]
        for u in lb:
            by_vertex[u].discard(b)
        for u in labels[best] - new_label:
            by_vertex[u].discard(best)
        labels[best] = new_label
        counts[best] += counts.pop(b)
        members[best].extend(members.pop(b))
        del labels[b]
        merges += 1
        heapq.heappush(heap, (counts[best], tuple(sorted(new_label)), best))

    merged: dict[VertexType, int] = {}
    merged_members: dict[VertexType, list[VertexType]] = {}
    for i, lab in labels.items():
        t = VertexType(lab)
        merged[t] = merged.get(t, 0) + counts[i]
        merged_members.setdefault(t, []).extend(members[i])
    coarse = AdviceBundle.from_histogram(TypeHistogram(merged, h.n))
    if count_threshold is not None and target_r is None:
        reached = all(c >= count_threshold for c in merged.values())
    else:
        reached = len(merged) <= target_r
    return CoarsenResult(
        coarse, {t: tuple(sorted(ms)) for t, ms in merged_members.items()}, reached, merges
    )


def bucket_membership(result: CoarsenResult) -> dict[VertexType, VertexType]:
    """Map every original advice type to the label of the bucket holding it."""
    return {m: label for label, ms in result.members.items() for m in ms}


# -- grouping of the test domain ---------------------------------------------

def group_for_testing(h: TypeHistogram, target: int) -> dict[VertexType, VertexType]:
    """Partition the support of ``h`` into at most ``target`` test labels.

    Labels at least as heavy as an average bucket (``n / target``) keep their
    own test label; the lighter ones are packed, in label order, into
    equal-mass buckets filling the remaining positions.
    """
    items = h.sorted_items()
    if target >= len(items):
        return {t: t for t, _ in items}
    target = max(1, target)
    heavy = sorted((t for t, c in items if c * target >= h.n), key=lambda t: (-h[t], t))[: target - 1]
    heavy_set = set(heavy)
    light = [(t, c) for t, c in items if t not in heavy_set]
    n_buckets = target - len(heavy)
    mass = sum(c for _, c in light)
    groups = {t: t for t in heavy}
    acc = 0
    for t, c in light:
        idx = min(n_buckets - 1, (acc * n_buckets) // mass) if mass else 0
        groups[t] = VertexType((), tag=f"bucket{idx:05d}")
        acc += c
    return groups


# -- remapping ---------------------------------------------------------------

@dataclass(frozen=True)
class Remapping:
    """``assignment[(true_type, slot)]`` is the advice label it is treated as, or ``None``."""

    assignment: Mapping[tuple[VertexType, int], VertexType | None]

    @property
    def mapped(self) -> int:
        return sum(1 for a in self.assignment.values() if a is not None)

    def check(self, c_star: TypeHistogram, advice: TypeHistogram) -> None:
        used: dict[VertexType, int] = {}
        for (t, _), a in self.assignment.items():
            if a is None:
                continue
            assert a.issubset(t)
            used[a] = used.get(a, 0) + 1
        assert all(used[a] <= advice[a] for a in used)
        assert sum(1 for (t, _) in self.assignment) == c_star.n


def _max_flow(cap: list[dict[int, int]], source: int, sink: int) -> tuple[int, list[dict[int, int]]]:
    """Edmonds-Karp on an adjacency-dict residual graph; returns the flow value and flows."""
    n = len(cap)
    residual = [dict(row) for row in cap]
    for u in range(n):
        for v in cap[u]:
            residual[v].setdefault(u, 0)
    total = 0
    while True:
        parent = [-1] * n
        parent[source] = source
        queue = deque([source])
        while queue and parent[sink] == -1:
            u = queue.popleft()
            for v, r in residual[u].items():
                if r > 0 and parent[v] == -1:
                    parent[v] = u
                    queue.append(v)
        if parent[sink] == -1:
            break
        push = math.inf
        v = sink
        while v != source:
            push = min(push, residual[parent[v]][v])
            v = parent[v]
        v = sink
        while v != source:
            residual[parent[v]][v] -= push
            residual[v][parent[v]] += push
            v = parent[v]
        total += push
    flows = [{v: c - residual[u][v] for v, c in cap[u].items() if c - residual[u][v] > 0} for u in range(n)]
    return total, flows


def remap_offline(c_star: TypeHistogram, advice: TypeHistogram) -> tuple[Remapping, int]:
    """Overlap-maximizing assignment of true types onto advice subset types."""
    true_types = [t for t, _ in c_star.sorted_items()]
    adv_types = [t for t, _ in advice.sorted_items()]
    r, s = len(true_types), len(adv_types)
    source, sink = r + s, r + s + 1
    cap: list[dict[int, int]] = [dict() for _ in range(r + s + 2)]
    for i, t in enumerate(true_types):
        cap[source][i] = c_star[t]
        for j, a in enumerate(adv_types):
            if a.issubset(t):
                cap[i][r + j] = c_star[t]
    for j, a in enumerate(adv_types):
        cap[r + j][sink] = advice[a]
    value, flows = _max_flow(cap, source, sink)
    assignment: dict[tuple[VertexType, int], VertexType | None] = {}
    for i, t in enumerate(true_types):
        slot = 0
        for j in sorted(flows[i]):
            for _ in range(flows[i][j]):
                assignment[(t, slot)] = adv_types[j - r]
                slot += 1
        for k in range(slot, c_star[t]):
            assignment[(t, k)] = None
    return Remapping(assignment), value


def brute_force_overlap(c_star: TypeHistogram, advice: TypeHistogram) -> int:
    """Best subset-respecting assignment by exhaustive enumeration (tiny inputs)."""
    vertices = c_star.expand()
    adv = [t for t, _ in advice.sorted_items()]
    left = [advice[t] for t in adv]
    options = [[j for j, a in enumerate(adv) if a.issubset(v)] for v in vertices]
    best = 0

    def go(i: int, got: int) -> None:
        nonlocal best
        if got + len(vertices) - i <= best:
            return
        if i == len(vertices):
            best = got
            return
        for j in options[i]:
            if left[j]:
                left[j] -= 1
                go(i + 1, got + 1)
                left[j] += 1
        go(i + 1, got)

    go(0, 0)
    return best


class SubsetIndex:
    """Finds advice labels contained in an arrival's neighbor set."""

    ENUMERATE_UP_TO = 12

    def __init__(self, labels: Iterable[VertexType]):
        self.labels = sorted(set(labels), key=lambda t: (-len(t), t))
        self.plain = {t.neighbors: t for t in self.labels if not t.is_synthetic()}
        self.synthetic = [t for t in self.labels if t.is_synthetic()]

    def candidates(self, arrival: VertexType) -> Iterable[VertexType]:
        if len(arrival) <= self.ENUMERATE_UP_TO and 2 ** len(arrival) < len(self.labels):
            nb = arrival.neighbors
            for k in range(len(nb), -1, -1):
                for sub in combinations(nb, k):
                    t = self.plain.get(sub)
                    if t is not None:
                        yield t
            for t in self.synthetic:
                if t.issubset(arrival):
                    yield t
        else:
            for t in self.labels:
                if len(t) <= len(arrival) and t.issubset(arrival):
                    yield t

    def best(self, arrival: VertexType, remaining: Mapping[VertexType, int]) -> VertexType | None:
        """Largest subset label with remaining count, then highest count, then smallest label."""
        best = None
        best_key = None
        for t in self.candidates(arrival):
            c = remaining.get(t, 0)
            if c <= 0:
                continue
            key = (-len(t), -c, t.neighbors, t.tag)
            if best_key is None or key < best_key:
                best, best_key = t, key
        return best


def remap_online(arrival: VertexType, remaining: Mapping[VertexType, int]) -> VertexType | None:
    """Greedy online remapping of one arrival onto an advice subset type (``None`` if none)."""
    return SubsetIndex(t for t, c in remaining.items() if c > 0).best(arrival, remaining)
