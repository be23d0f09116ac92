"""Fast randomized invariant checks, runnable without pytest (``tamatch selftest``)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .advice import AdviceBundle, brute_force_overlap, patch_advice, remap_offline
from .algorithms import AblationFlags, TaMParams, greedy, mimic, ranking, test_and_match
from .core import ReducedDomain, TypeHistogram, VertexType, histogram_vector, l1_histogram, l1_reduced
from .matching import ImpliedGraph, brute_force_matching_size, max_matching, max_matching_size


def random_histogram(rng: np.random.Generator, n: int, max_types: int | None = None, p: float = 0.4) -> TypeHistogram:
    """Random histogram over ``n`` offline vertices with at most ``max_types`` distinct types."""
    k = n if max_types is None else int(rng.integers(1, max_types + 1))
    pool = [VertexType(np.flatnonzero(rng.random(n) < p)) for _ in range(k)]
    return TypeHistogram.from_types([pool[int(rng.integers(k))] for _ in range(n)], n)


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


def _matching_oracle(rng, trials):
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        h = random_histogram(rng, n)
        g = ImpliedGraph.from_histogram(h)
        mm = max_matching(g)
        if not mm.is_valid_for(g.online_types) or mm.size != brute_force_matching_size(n, g.online_types):
            return f"mismatch on {dict(h)}"
    return ""


def _flow_oracle(rng, trials):
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        a, b = random_histogram(rng, n, 4), random_histogram(rng, n, 4)
        remap, value = remap_offline(a, b)
        remap.check(a, b)
        if value != brute_force_overlap(a, b) or value != remap.mapped:
            return f"flow value {value} wrong for {dict(a)} vs {dict(b)}"
    return ""


def _patch_identities(rng, trials):
    for _ in range(trials):
        n = int(rng.integers(1, 12))
        c_star, c_hat = random_histogram(rng, n), random_histogram(rng, n, p=0.2)
        bundle = AdviceBundle.from_histogram(c_hat)
        patched, rec = patch_advice(bundle)
        k = n - bundle.n_hat
        if max_matching_size(patched.histogram) != n or l1_histogram(c_hat, patched.histogram) != 2 * k:
            return f"patch identity broken for {dict(c_hat)}"
        if l1_histogram(c_star, patched.histogram) > l1_histogram(c_star, c_hat) + 2 * k:
            return f"patch triangle bound broken for {dict(c_hat)}"
    return ""


def _reduced_identity(rng, trials):
    for _ in range(trials):
        n = int(rng.integers(2, 15))
        p, q = random_histogram(rng, n, p=0.3), random_histogram(rng, n, p=0.3)
        dom = ReducedDomain(q)
        lhs = l1_reduced(histogram_vector(p, dom), histogram_vector(q, dom))
        if abs(lhs - l1_histogram(p, q) / n) > 1e-12:
            return f"reduced L1 {lhs} != {l1_histogram(p, q) / n}"
    return ""


def _mimic_bound(rng, trials):
    for _ in range(trials):
        n = int(rng.integers(1, 10))
        c_star, c_hat = random_histogram(rng, n), random_histogram(rng, n)
        arrivals = [c_star.expand()[i] for i in rng.permutation(n)]
        got = mimic(arrivals, c_hat)
        n_hat = max_matching_size(c_hat)
        if not got.is_valid_for(arrivals) or 2 * got.size < 2 * n_hat - l1_histogram(c_star, c_hat):
            return f"mimic made {got.size} with n_hat={n_hat}"
    return ""


def _valid_outputs(rng, trials):
    for t in range(trials):
        n = int(rng.integers(2, 30))
        c_star, c_hat = random_histogram(rng, n, p=0.2), random_histogram(rng, n, p=0.2)
        arrivals = [c_star.expand()[i] for i in rng.permutation(n)]
        n_star = max_matching_size(c_star)
        outs = [greedy(arrivals, n), ranking(arrivals, n, rng)]
        for flags in (AblationFlags(), AblationFlags(False, False, False)):
            outs.append(test_and_match(arrivals, n, c_hat, flags, TaMParams(gamma=100.0), seed=t).matching)
        for m in outs:
            if not m.is_valid_for(arrivals) or m.size > n_star:
                return f"invalid matching on trial {t}"
    return ""


CHECKS: dict[str, Callable] = {
    "max matching equals brute force": _matching_oracle,
    "offline remap flow equals exhaustive optimum": _flow_oracle,
    "patch identities": _patch_identities,
    "reduced-domain L1 identity": _reduced_identity,
    "mimic lower bound": _mimic_bound,
    "algorithms output valid matchings": _valid_outputs,
}


def run_selftest(seed: int = 0, trials: int = 100) -> list[Check]:
    results = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        try:
            detail = fn(np.random.default_rng([seed, i]), trials)
        except Exception as exc:  # report, do not crash the CLI
            detail = f"{type(exc).__name__}: {exc}"
        results.append(Check(name, not detail, detail))
    return results
