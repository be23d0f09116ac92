"""Benchmark instance generators, advice corruption and arrival orders.

Every generator is a pure function of its parameters and a 64-bit seed.  Seeds
are split per purpose with :func:`stream`, so changing, say, the corruption
level never perturbs the arrival order drawn for the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .core import InvalidInput, TypeHistogram, VertexType
from .matching import ImpliedGraph

C25 = 0.81034

PURPOSES = {"instance": 1, "corruption": 2, "arrival": 3, "algorithm": 4, "test": 5}


def stream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, *extra)``."""
    key = (PURPOSES[purpose],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=key))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class HardInstanceParams:
    n: int
    c25: float = C25
    seed: int = 0

    @property
    def m(self) -> int:
        return round_half_up(self.c25 / 2 * self.n)

    def validate(self) -> None:
        if self.n < 4 or self.n % 2:
            raise InvalidInput(f"hard instance needs an even n >= 4, got {self.n}")
        if 2 * self.m > self.n:
            raise InvalidInput(f"m={self.m} leaves no room: 2m > n={self.n}")


def gen_hard_instance(params: HardInstanceParams) -> TypeHistogram:
    """Known-IID hard family: ``m`` random pairs, ``m`` random triples, rest full."""
    params.validate()
    n, m = params.n, params.m
    rng = stream(params.seed, "instance")
    types: list[VertexType] = []
    for k in (2, 3):
        for _ in range(m):
            types.append(VertexType(rng.choice(n, size=k, replace=False).tolist()))
    types.extend([VertexType(range(n))] * (n - 2 * m))
    return TypeHistogram.from_types(types, n)


def gen_gadget(n: int, which: int) -> tuple[TypeHistogram, list[VertexType]]:
    """The two indistinguishable graphs of the adversarial-order hardness argument.

    Returns the histogram and the canonical arrival order (0-indexed, so
    ``v_j`` with ``j < n/2`` is adjacent to ``u_j`` and ``u_{j+n/2}``).
    """
    if n < 2 or n % 2:
        raise InvalidInput(f"gadget needs an even n >= 2, got {n}")
    if which not in (1, 2):
        raise InvalidInput("which must be 1 or 2")
    half = n // 2
    order = [VertexType((j, j + half)) for j in range(half)]
    if which == 1:
        order += [VertexType((j - half,)) for j in range(half, n)]
    else:
        order += [VertexType((j,)) for j in range(half, n)]
    return TypeHistogram.from_types(order, n), order


class CorruptionKind(str, Enum):
    ADD_UNION = "add"
    REPLACE = "replace"

    @property
    def code(self) -> int:
        return 1 if self is CorruptionKind.ADD_UNION else 2


@dataclass(frozen=True)
class CorruptionSpec:
    alpha: float
    kind: CorruptionKind
    seed: int = 0
    edge_prob: float | None = None

    def prob(self, n: int) -> float:
        p = self.edge_prob if self.edge_prob is not None else math.log(n) / (10 * n)
        if not 0 < p < 1:
            raise InvalidInput(f"edge probability {p} outside (0, 1)")
        return p


def corrupt_advice(c_star: TypeHistogram, spec: CorruptionSpec) -> TypeHistogram:
    """Corrupt exactly ``round(alpha * n)`` online vertices of ``c_star``.

    Each selected vertex gets a random type with independent inclusion
    probability ``edge_prob``; ADD_UNION keeps the old neighbors as well,
    REPLACE drops them.
    """
    if not 0 <= spec.alpha <= 1:
        raise InvalidInput(f"alpha={spec.alpha} outside [0, 1]")
    n = c_star.n
    k = round_half_up(spec.alpha * n)
    if k == 0:
        return c_star
    p = spec.prob(n)
    rng = stream(spec.seed, "corruption", spec.kind.code, round_half_up(spec.alpha * 10**6))
    vertices = c_star.expand()
    chosen = rng.choice(n, size=k, replace=False)
    for idx in np.sort(chosen):
        size = rng.binomial(n, p)
        fresh = rng.choice(n, size=size, replace=False).tolist() if size else []
        if spec.kind is CorruptionKind.ADD_UNION:
            vertices[idx] = VertexType(vertices[idx].as_set.union(fresh))
        else:
            vertices[idx] = VertexType(fresh)
    return TypeHistogram.from_types(vertices, n)


def random_order(graph: ImpliedGraph, seed: int) -> list[int]:
    """Uniformly random arrival permutation of the online vertices of ``graph``."""
    rng = stream(seed, "arrival")
    return rng.permutation(len(graph.online_types)).tolist()


def arrival_sequence(h: TypeHistogram, seed: int) -> list[VertexType]:
    graph = ImpliedGraph.from_histogram(h)
    return [graph.online_types[i] for i in random_order(graph, seed)]


# -- text format ---------------------------------------------------------

def dumps_histogram(h: TypeHistogram) -> str:
    lines = [f"n={h.n}"]
    for t, c in h.sorted_items():
        if t.is_synthetic():
            raise InvalidInput(f"synthetic label {t!r} cannot be serialized")
        lines.append(f"{c}\t" + ",".join(map(str, t.neighbors)))
    return "\n".join(lines) + "\n"


def loads_histogram(text: str) -> TypeHistogram:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("n="):
        raise InvalidInput("missing 'n=<int>' header")
    n = int(lines[0][2:])
    counts: dict[VertexType, int] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            count, _, body = line.partition("\t")
            t = VertexType(int(i) for i in body.split(",") if i != "")
            c = int(count)
        except ValueError as exc:
            raise InvalidInput(f"line {lineno}: {exc}") from exc
        if t in counts:
            raise InvalidInput(f"line {lineno}: duplicate type {t}")
        counts[t] = c
    return TypeHistogram(counts, n)


def save_histogram(h: TypeHistogram, path: str | Path) -> None:
    Path(path).write_text(dumps_histogram(h), encoding="utf-8")


def load_histogram(path: str | Path) -> TypeHistogram:
    return loads_histogram(Path(path).read_text(encoding="utf-8"))
