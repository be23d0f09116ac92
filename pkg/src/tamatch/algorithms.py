"""Online matching algorithms: Greedy, Ranking, Mimic and the TestAndMatch gate.

Every algorithm consumes the online vertices as a sequence of types in arrival
order; the returned :class:`Matching` is keyed by arrival position.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .advice import (
    NEW_TAG,
    AdviceBundle,
    SubsetIndex,
    bucket_coarsen,
    bucket_membership,
    group_for_testing,
    patch_advice,
)
from .core import InvalidInput, Matching, ReducedDomain, TypeHistogram, VertexType
from .disttest import ArrivalBuffer, largest_domain_within, minimax_test, sample_budget
from .instances import gen_gadget, stream
from .matching import max_matching_size


@lru_cache(maxsize=1 << 16)
def _nbr_array(t: VertexType) -> np.ndarray:
    return np.fromiter(t.neighbors, dtype=np.int64, count=len(t))


def _check_arrivals(arrivals: Sequence[VertexType], n: int) -> None:
    if len(arrivals) > n:
        raise InvalidInput(f"{len(arrivals)} arrivals for n={n} offline vertices")
    for t in arrivals:
        if t.max_index() >= n:
            raise InvalidInput(f"arrival type {t} out of range for n={n}")


# -- baselines ---------------------------------------------------------------

def greedy(arrivals: Sequence[VertexType], n: int) -> Matching:
    """Match each arrival to its lowest-index free neighbor."""
    _check_arrivals(arrivals, n)
    matched = np.zeros(n, dtype=bool)
    pairs: dict[int, int] = {}
    for v, t in enumerate(arrivals):
        nb = _nbr_array(t)
        free = nb[~matched[nb]]
        if len(free):
            u = int(free[0])
            matched[u] = True
            pairs[v] = u
    return Matching(pairs)


def _ranking_into(
    arrivals: Sequence[VertexType], start: int, matched: np.ndarray, pairs: dict[int, int], rng: np.random.Generator
) -> int:
    rank = rng.permutation(len(matched))
    made = 0
    for v in range(start, len(arrivals)):
        nb = _nbr_array(arrivals[v])
        free = nb[~matched[nb]]
        if len(free):
            u = int(free[np.argmin(rank[free])])
            matched[u] = True
            pairs[v] = u
            made += 1
    return made


def ranking(arrivals: Sequence[VertexType], n: int, rng: np.random.Generator) -> Matching:
    """One uniform rank over the offline side; each arrival takes its best-ranked free neighbor."""
    _check_arrivals(arrivals, n)
    pairs: dict[int, int] = {}
    _ranking_into(arrivals, 0, np.zeros(n, dtype=bool), pairs, rng)
    return Matching(pairs)


# -- Mimic -------------------------------------------------------------------

class Phase(str, enum.Enum):
    TESTING = "testing"
    MIMICKING = "mimicking"
    BASELINE = "baseline"


@dataclass(frozen=True)
class AblationFlags:
    use_remap: bool = True
    use_bucket: bool = True
    use_patch: bool = True


class CredibilityError(AssertionError):
    """Mimic proposed a pair that is not a free edge of the true graph."""


@dataclass
class RunState:
    """Mutable bookkeeping of one run of Mimic (and of the Baseline taking over)."""

    n: int
    matched_offline: np.ndarray
    remaining: dict[VertexType, int]
    slots: dict[VertexType, deque]
    label_of: Mapping[VertexType, VertexType]
    remap: SubsetIndex | None = None
    patch_pool: set[int] | None = None
    patch_label: VertexType | None = None
    pairs: dict[int, int] = field(default_factory=dict)
    consumed: int = 0
    phase: Phase = Phase.TESTING

    @property
    def m(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_bundle(
        cls,
        bundle: AdviceBundle,
        label_of: Mapping[VertexType, VertexType] | None = None,
        use_remap: bool = False,
    ) -> "RunState":
        slots = {t: deque(us) for t, us in bundle.slots.items()}
        remaining = dict(bundle.histogram.items())
        if label_of is None:
            label_of = {t: t for t in bundle.histogram}
        patch_label = next((t for t in bundle.histogram if t.tag == NEW_TAG), None)
        return cls(
            n=bundle.n,
            matched_offline=np.zeros(bundle.n, dtype=bool),
            remaining=remaining,
            slots=slots,
            label_of=label_of,
            remap=SubsetIndex(bundle.histogram) if use_remap else None,
            patch_pool=set(bundle.patch_pool) if patch_label is not None else None,
            patch_label=patch_label,
        )

    def _match(self, v: int, t: VertexType, u: int) -> None:
        if u not in t or self.matched_offline[u]:
            raise CredibilityError(f"arrival {v} of type {t} proposed to u{u}")
        self.matched_offline[u] = True
        self.pairs[v] = u
        if self.patch_pool is not None:
            self.patch_pool.discard(u)


def _has_free_partner(state: RunState, label: VertexType) -> bool:
    if state.remaining.get(label, 0) <= 0:
        return False
    if label == state.patch_label:
        return bool(state.patch_pool)
    return any(u is not None for u in state.slots[label])


def mimic_step(state: RunState, v: int, t: VertexType) -> int | None:
    """Process arrival ``v`` of true type ``t``; returns its partner or ``None``."""
    if state.phase is Phase.BASELINE:
        raise InvalidInput("mimic_step called after the switch to Baseline")
    state.consumed += 1
    label = state.label_of.get(t)
    if label is not None and state.remaining.get(label, 0) <= 0:
        label = None
    if label is None and state.remap is not None:
        useful = {}
        for lab in state.remap.candidates(t):
            if _has_free_partner(state, lab):
                useful[lab] = state.remaining[lab]
        label = state.remap.best(t, useful) if useful else None
    if label is not None:
        state.remaining[label] -= 1
        if label == state.patch_label:
            if state.slots[label]:
                state.slots[label].popleft()
            u = min(state.patch_pool) if state.patch_pool else None
            if u is not None:
                state._match(v, t, u)
            return u
        u = state.slots[label].popleft()
        if u is not None:
            state._match(v, t, u)
            return u
    if state.patch_pool:
        for u in t.neighbors:
            if u in state.patch_pool:
                state._match(v, t, u)
                if state.remaining.get(state.patch_label, 0) > 0:
                    state.remaining[state.patch_label] -= 1
                return u
    return None


def mimic(arrivals: Sequence[VertexType], advice: TypeHistogram, use_remap: bool = False) -> Matching:
    """Blindly follow a maximum matching of the advice graph for the whole stream."""
    _check_arrivals(arrivals, advice.n)
    state = RunState.from_bundle(AdviceBundle.from_histogram(advice), use_remap=use_remap)
    for v, t in enumerate(arrivals):
        mimic_step(state, v, t)
    return Matching(state.pairs)


# -- TestAndMatch --------------------------------------------------------------

@dataclass(frozen=True)
class TaMParams:
    """Knobs of the testing gate.

    ``bucket_fraction`` bounds the testing cap as a fraction of ``n`` and so
    fixes the size of the test domain that bucketing aims for.
    """

    beta: float = 0.696
    epsilon: float | None = None
    delta: float = 0.05
    constant: float = 1.0
    gamma: float = 0.5
    bucket_fraction: float = 0.1

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise InvalidInput("beta must lie in (0, 1)")
        if not 0 < self.delta < 1:
            raise InvalidInput("delta must lie in (0, 1)")
        if self.constant <= 0 or self.gamma <= 0 or self.bucket_fraction <= 0:
            raise InvalidInput("constant, gamma and bucket_fraction must be positive")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidInput("epsilon must be positive")


@dataclass
class RunOutcome:
    m: int
    n_star: int
    verdict: str
    l1_hat: float = math.nan
    k: int = 0
    switch_at: int | None = None
    matched_before_switch: int = 0
    r_hat: int = 0
    cap: int = 0
    matching: Matching = field(default_factory=Matching, repr=False)

    @property
    def ratio(self) -> float:
        return self.m / self.n_star if self.n_star else math.nan

    def summary(self) -> str:
        l1 = "nan" if math.isnan(self.l1_hat) else f"{self.l1_hat:.6f}"
        return (
            f"m={self.m} n_star={self.n_star} ratio={self.ratio:.6f} verdict={self.verdict} "
            f"l1_hat={l1} k={self.k} r_hat={self.r_hat} cap={self.cap} switch_at={self.switch_at}"
        )


@dataclass
class Prepared:
    """Advice after the per-flag preprocessing, ready for a run."""

    bundle: AdviceBundle
    label_of: dict[VertexType, VertexType]
    domain: ReducedDomain
    q: np.ndarray
    coarsening: str


def prepare_advice(advice: TypeHistogram, flags: AblationFlags, target_r: int | None) -> Prepared:
    """Bucket, then patch; the test domain is coarsened to ``target_r`` labels when bucketing."""
    original = AdviceBundle.from_histogram(advice)
    bundle = original
    label_of = {t: t for t in advice}
    how = "none"
    if flags.use_bucket and target_r is not None and original.r_hat > target_r:
        want = max(1, target_r - 1) if flags.use_patch else target_r
        result = bucket_coarsen(original, target_r=want)
        if result.reached_target and result.bundle.n_hat >= original.n_hat:
            bundle = result.bundle
            label_of = bucket_membership(result)
            how = "intersection"
    if flags.use_patch:
        bundle, record = patch_advice(bundle)
        label_of = {t: lab for t, lab in label_of.items() if lab in bundle.histogram}
    groups = None
    if flags.use_bucket and target_r is not None and bundle.r_hat > target_r:
        groups = group_for_testing(bundle.histogram, target_r)
        how = "grouped" if how == "none" else how + "+grouped"
    test_group = groups or {t: t for t in bundle.histogram}
    keys = list(label_of) + [t for t in bundle.histogram if t.is_synthetic()]
    domain = ReducedDomain(keys, {t: test_group[label_of.get(t, t)] for t in keys})
    q = np.zeros(len(domain))
    pos = {lab: i for i, lab in enumerate(domain.labels)}
    for t, c in bundle.histogram.items():
        q[pos[test_group[t]]] += c / bundle.n
    return Prepared(bundle, label_of, domain, q, how)


def test_and_match(
    arrivals: Sequence[VertexType],
    n: int,
    advice: TypeHistogram,
    flags: AblationFlags = AblationFlags(),
    params: TaMParams = TaMParams(),
    seed: int = 0,
    n_star: int | None = None,
) -> RunOutcome:
    """Mimic the advice while testing it on the stream; fall back to Ranking on Fail.

    Ranking draws from ``stream(seed, "algorithm")`` and the tester from
    ``stream(seed, "test")``, so a run that never trusts the advice is
    identical to a plain Ranking run with the same seed.
    """
    _check_arrivals(arrivals, n)
    if advice.n != n:
        raise InvalidInput(f"advice over n={advice.n}, instance over n={n}")
    if n_star is None:
        n_star = max_matching_size(TypeHistogram.from_types(arrivals, n)) if arrivals else 0
    algo_rng = stream(seed, "algorithm")
    test_rng = stream(seed, "test")

    def baseline_only(verdict: str, r_hat: int = 0, cap: int = 0) -> RunOutcome:
        pairs: dict[int, int] = {}
        m = _ranking_into(arrivals, 0, np.zeros(n, dtype=bool), pairs, algo_rng)
        return RunOutcome(m, n_star, verdict, switch_at=0, r_hat=r_hat, cap=cap, matching=Matching(pairs))

    n_hat = n if flags.use_patch else AdviceBundle.from_histogram(advice).n_hat
    frac = n_hat / n
    if frac <= params.beta:
        return baseline_only("below-beta")
    target = None
    if flags.use_bucket:
        target = largest_domain_within(
            params.bucket_fraction * n, frac, params.beta, params.delta, params.epsilon, params.constant
        )
        target = target or None  # no usable test domain: the guard will decide
    prep = prepare_advice(advice, flags, target)
    frac = prep.bundle.n_hat / n
    if frac <= params.beta:
        return baseline_only("below-beta")
    budget = sample_budget(prep.domain.r_hat, frac, params.beta, params.delta, params.epsilon, params.constant)
    if budget.cap > params.gamma * n:
        return baseline_only("guard", prep.domain.r_hat, budget.cap)

    state = RunState.from_bundle(prep.bundle, prep.label_of, flags.use_remap)
    buffer = ArrivalBuffer(n)

    def fresh() -> Iterator[VertexType]:
        for v in range(len(arrivals)):
            mimic_step(state, v, arrivals[v])
            yield arrivals[v]

    feed = fresh()
    result = minimax_test(budget, prep.q, prep.domain, buffer, feed, test_rng)
    k = len(buffer.seen)
    out = RunOutcome(
        0, n_star, "pass" if result.passed else "fail", result.l1_hat, k, r_hat=prep.domain.r_hat, cap=budget.cap
    )
    if result.passed:
        state.phase = Phase.MIMICKING
        for _ in feed:
            pass
    else:
        if result.reason:
            out.verdict = "fail:" + result.reason.split(":")[0]
        state.phase = Phase.BASELINE
        out.switch_at = k
        out.matched_before_switch = state.m
        _ranking_into(arrivals, k, state.matched_offline, state.pairs, algo_rng)
    out.m = state.m
    out.matching = Matching(dict(sorted(state.pairs.items())))
    return out


# -- hardness gadget ---------------------------------------------------------------

def hardness_demo(n: int, true_which: int, advised_which: int) -> Fraction:
    """Follow the advised gadget's perfect matching on the first half, then match greedily.

    On the true gadget this gives ratio 1 when the advice is right and at most
    1/2 (plus rounding) when it is wrong: both gadgets look identical for the
    first ``n/2`` arrivals.
    """
    _, order = gen_gadget(n, true_which)
    half = n // 2
    plan = {}
    for j in range(half):
        # the advised gadget's unique perfect matching on the shared prefix
        plan[j] = j + half if advised_which == 1 else j
    matched = np.zeros(n, dtype=bool)
    pairs: dict[int, int] = {}
    for v, t in enumerate(order):
        if v < half:
            u = plan[v]
            if u in t and not matched[u]:
                matched[u] = True
                pairs[v] = u
            continue
        for u in t.neighbors:
            if not matched[u]:
                matched[u] = True
                pairs[v] = u
                break
    n_star = max_matching_size(TypeHistogram.from_types(order, n))
    return Fraction(len(pairs), n_star)
