"""Vertex types, type histograms and L1 arithmetic.

An online vertex is described by its *type*: the set of offline vertices it is
adjacent to.  Instances and advice are both sparse histograms over types.

Two L1 scales are kept apart on purpose:

* :func:`l1_histogram` works on counts and returns an integer, ``L1(c*, c_hat)``;
* :func:`l1_normalized` works on the implied distributions ``c/n`` and returns
  ``L1(c*, c_hat) / n``.

Both use the plain ``sum |x_i - y_i|`` definition over the union of supports, so
two disjoint histograms of mass ``n`` are at count-distance ``2n``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

NORMALIZATION_TOL = 1e-9


class InvalidInput(ValueError):
    """Raised when an operation receives arguments violating its contract."""


class VertexType:
    """Canonical, hashable neighbor set of an online vertex.

    ``neighbors`` is a strictly increasing tuple of offline indices.  ``tag``
    distinguishes synthetic labels (the patch dummy, the reduced-domain ``t0``)
    from real types that happen to share the same neighbor set.
    """

    __slots__ = ("neighbors", "tag", "_set", "_hash")

    def __init__(self, neighbors: Iterable[int] = (), tag: str = ""):
        nb = tuple(sorted({int(i) for i in neighbors}))
        if nb and nb[0] < 0:
            raise InvalidInput(f"negative offline index in type {nb}")
        object.__setattr__(self, "neighbors", nb)
        object.__setattr__(self, "tag", tag)
        object.__setattr__(self, "_set", frozenset(nb))
        object.__setattr__(self, "_hash", hash((nb, tag)))

    def __setattr__(self, name, value):
        raise AttributeError("VertexType is immutable")

    @property
    def as_set(self) -> frozenset:
        return self._set

    def __len__(self) -> int:
        return len(self.neighbors)

    def __iter__(self) -> Iterator[int]:
        return iter(self.neighbors)

    def __contains__(self, u: int) -> bool:
        return u in self._set

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if not isinstance(other, VertexType):
            return NotImplemented
        return self._hash == other._hash and self.neighbors == other.neighbors and self.tag == other.tag

    def __lt__(self, other: "VertexType") -> bool:
        return (self.neighbors, self.tag) < (other.neighbors, other.tag)

    def __le__(self, other: "VertexType") -> bool:
        return self == other or self < other

    def issubset(self, other: "VertexType") -> bool:
        return self._set <= other._set

    def is_synthetic(self) -> bool:
        return bool(self.tag)

    def max_index(self) -> int:
        return self.neighbors[-1] if self.neighbors else -1

    def __repr__(self) -> str:
        body = "{" + ",".join(map(str, self.neighbors)) + "}"
        return f"{self.tag}{body}" if self.tag else body


def vtype(*neighbors: int) -> VertexType:
    """Shorthand constructor: ``vtype(0, 2)`` is the type ``{u0, u2}``."""
    return VertexType(neighbors)


class TypeHistogram(Mapping):
    """Sparse map from :class:`VertexType` to positive counts summing to ``n``.

    Immutable; every transformation builds a new histogram, so the
    normalization invariant is re-checked by the constructor each time.
    """

    __slots__ = ("_counts", "n")

    def __init__(self, counts: Mapping[VertexType, int], n: int):
        n = int(n)
        if n < 0:
            raise InvalidInput("n must be nonnegative")
        clean: dict[VertexType, int] = {}
        total = 0
        for t, c in counts.items():
            if not isinstance(t, VertexType):
                raise InvalidInput(f"histogram key {t!r} is not a VertexType")
            c = int(c)
            if c < 0:
                raise InvalidInput(f"negative count {c} for type {t}")
            if c == 0:
                continue
            if t.max_index() >= n:
                raise InvalidInput(f"type {t} references an offline vertex >= n={n}")
            clean[t] = c
            total += c
        if total != n:
            raise InvalidInput(f"counts sum to {total}, expected n={n}")
        self._counts = clean
        self.n = n

    @classmethod
    def from_types(cls, types: Iterable[VertexType], n: int) -> "TypeHistogram":
        return cls(Counter(types), n)

    def __getitem__(self, t: VertexType) -> int:
        return self._counts[t]

    def get(self, t, default=0):
        return self._counts.get(t, default)

    def __iter__(self):
        return iter(self._counts)

    def __len__(self) -> int:
        return len(self._counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TypeHistogram):
            return NotImplemented
        return self.n == other.n and self._counts == other._counts

    def __hash__(self):
        return hash((self.n, frozenset(self._counts.items())))

    @property
    def support(self) -> frozenset:
        return frozenset(self._counts)

    def sorted_items(self) -> list[tuple[VertexType, int]]:
        return sorted(self._counts.items())

    def expand(self) -> list[VertexType]:
        """Online vertices in deterministic order: sorted type, then multiplicity."""
        out: list[VertexType] = []
        for t, c in self.sorted_items():
            out.extend([t] * c)
        return out

    def distribution(self) -> dict[VertexType, float]:
        return {t: c / self.n for t, c in self._counts.items()}

    def __repr__(self) -> str:
        return f"TypeHistogram(n={self.n}, r={len(self)})"


@dataclass
class Matching:
    """Injective map from online-vertex index to offline-vertex index."""

    pairs: dict[int, int] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def is_valid_for(self, online_types: Sequence[VertexType]) -> bool:
        if len(set(self.pairs.values())) != len(self.pairs):
            return False
        return all(
            0 <= v < len(online_types) and u in online_types[v] for v, u in self.pairs.items()
        )


T0 = VertexType((), tag="t0")


class ReducedDomain:
    """Advice support plus one dummy label absorbing every unpredicted type.

    ``groups`` optionally maps advice labels onto coarser test labels (several
    advice labels may share one position); by default each advice label is its
    own position.  The dummy ``t0`` always sits at the last position.
    """

    def __init__(self, advice_labels: Iterable[VertexType], groups: Mapping[VertexType, VertexType] | None = None):
        advice_labels = sorted(set(advice_labels))
        if T0 in advice_labels:
            raise InvalidInput("t0 cannot be an advice label")
        if groups is None:
            groups = {t: t for t in advice_labels}
        test_labels = sorted({groups[t] for t in advice_labels})
        pos = {lab: i for i, lab in enumerate(test_labels)}
        self.labels: tuple[VertexType, ...] = tuple(test_labels) + (T0,)
        self.t0_index = len(test_labels)
        self.index: dict[VertexType, int] = {t: pos[groups[t]] for t in advice_labels}
        self._label_of = {t: groups[t] for t in advice_labels}

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def r_hat(self) -> int:
        return len(self.labels) - 1

    def position(self, t: VertexType) -> int:
        return self.index.get(t, self.t0_index)

    def label(self, t: VertexType) -> VertexType:
        return self._label_of.get(t, T0)

    def vector(self, dist: Mapping[VertexType, float]) -> np.ndarray:
        """Push a distribution over types forward onto the reduced domain."""
        v = np.zeros(len(self.labels))
        for t, p in dist.items():
            v[self.position(t)] += p
        return v


def reduce_type(t: VertexType, domain: ReducedDomain) -> VertexType:
    """Label of ``t`` in the reduced domain: its (group) label if predicted, else ``t0``."""
    return domain.label(t)


def l1_histogram(a: TypeHistogram, b: TypeHistogram) -> int:
    """Count-scale L1 distance, summed over the union of supports."""
    if a.n != b.n:
        raise InvalidInput(f"histograms over different n ({a.n} vs {b.n})")
    total = 0
    for t, c in a.items():
        total += abs(c - b.get(t, 0))
    for t, c in b.items():
        if t not in a:
            total += c
    return total


def l1_normalized(a: TypeHistogram, b: TypeHistogram) -> float:
    """``L1(a/n, b/n)``; zero for the empty instance."""
    if a.n != b.n:
        raise InvalidInput(f"histograms over different n ({a.n} vs {b.n})")
    return l1_histogram(a, b) / a.n if a.n else 0.0


def l1_reduced(p_hat: np.ndarray, q: np.ndarray) -> float:
    """L1 between two frequency vectors on a reduced domain (``t0`` last).

    ``q`` must give zero mass to ``t0``, so the distance is the predicted-label
    part plus all of ``p_hat``'s mass on ``t0``.
    """
    p_hat = np.asarray(p_hat, dtype=float)
    q = np.asarray(q, dtype=float)
    if p_hat.shape != q.shape or p_hat.ndim != 1 or len(p_hat) == 0:
        raise InvalidInput(f"frequency vectors of mismatched shape {p_hat.shape} vs {q.shape}")
    for name, v in (("p_hat", p_hat), ("q", q)):
        if abs(v.sum() - 1.0) > NORMALIZATION_TOL or (v < 0).any():
            raise InvalidInput(f"{name} is not a probability vector")
    if q[-1] != 0:
        raise InvalidInput("q must assign zero mass to t0")
    return float(np.abs(p_hat[:-1] - q[:-1]).sum() + p_hat[-1])


def histogram_vector(h: TypeHistogram, domain: ReducedDomain) -> np.ndarray:
    return domain.vector(h.distribution())
