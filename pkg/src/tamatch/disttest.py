"""Poissonized identity testing of advice against random-order arrivals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .core import InvalidInput, ReducedDomain, VertexType, l1_reduced


class StreamExhausted(RuntimeError):
    """The arrival stream ran out before the sampler got its fresh arrivals."""


def poisson_tail_bound(mean: float, x: float) -> float:
    """Upper bound on ``Pr[|X - mean| >= x]`` for ``X ~ Poisson(mean)``."""
    if mean <= 0 or x <= 0:
        raise InvalidInput("mean and deviation must be positive")
    return min(1.0, 2.0 * math.exp(-(x * x) / (2.0 * (mean + x))))


def poisson_sample(mean: float, rng: np.random.Generator) -> int:
    if not mean > 0:
        raise InvalidInput(f"Poisson mean must be positive, got {mean}")
    return int(rng.poisson(mean))


@dataclass(frozen=True)
class TestBudget:
    __test__ = False

    s: int
    cap: int
    delta_prime: float
    delta_poi: float
    epsilon: float
    tau: float
    delta: float = math.nan

    @property
    def feasible(self) -> bool:
        """Whether ``delta' + delta_poi <= delta`` was attainable."""
        return self.delta_prime + self.delta_poi <= self.delta * (1 + 1e-9)

    def __post_init__(self):
        if self.s < 1 or self.cap < self.s:
            raise InvalidInput(f"invalid budget s={self.s}, cap={self.cap}")
        if not self.epsilon > 0:
            raise InvalidInput("epsilon must be positive")


def _sample_size(r_hat: int, epsilon: float, delta_prime: float, constant: float) -> int:
    num = constant * (r_hat + 1) * math.log(1.0 / delta_prime)
    return max(1, math.ceil(num / (epsilon**2 * math.log(r_hat + 2))))


def _cap(s: int, r_hat: int) -> int:
    return max(s, math.ceil(s * math.sqrt(math.log(r_hat + 1)))) if r_hat > 0 else s


def _poisson_slack_bound(s: int, r_hat: int) -> tuple[int, float]:
    cap = _cap(s, r_hat)
    return cap, poisson_tail_bound(s, cap - s) if cap > s else 1.0


def sample_budget(
    r_hat: int,
    n_hat_frac: float,
    beta: float,
    delta: float,
    epsilon: float | None = None,
    constant: float = 1.0,
) -> TestBudget:
    """Sample budget and threshold for a reduced domain of ``r_hat + 1`` labels.

    ``delta`` is split as ``delta' + delta_poi`` where ``delta_poi`` is the
    Poisson tail at the slack ``cap - s``.  Shrinking ``delta'`` grows ``s`` and
    so the slack, hence ``delta' + delta_poi`` is increasing in ``delta'`` and
    the largest feasible ``delta'`` is found by bisection.  With ``r_hat <= 1``
    the cap has no slack and the split is infeasible; ``delta_poi`` is then 1.
    """
    if epsilon is None:
        epsilon = n_hat_frac - beta
    if not epsilon > 0:
        raise InvalidInput(f"epsilon must be positive, got {epsilon}")
    if not 0 < delta < 1:
        raise InvalidInput("delta must lie in (0, 1)")
    if r_hat < 0:
        raise InvalidInput("r_hat must be nonnegative")
    tau = 2 * (n_hat_frac - beta) - epsilon

    def total(dp: float) -> tuple[float, int, int, float]:
        s = _sample_size(r_hat, epsilon, dp, constant)
        cap, dpoi = _poisson_slack_bound(s, r_hat)
        return dp + dpoi, s, cap, dpoi

    lo, hi = 1e-300, delta
    if total(lo)[0] > delta:
        s = _sample_size(r_hat, epsilon, delta, constant)
        cap, dpoi = _poisson_slack_bound(s, r_hat)
        return TestBudget(s, cap, delta, dpoi, epsilon, tau, delta)
    for _ in range(100):
        mid = math.sqrt(lo * hi)  # geometric: delta' may need to be tiny
        if total(mid)[0] <= delta:
            lo = mid
        else:
            hi = mid
        if hi / lo < 1 + 1e-9:
            break
    _, s, cap, dpoi = total(lo)
    return TestBudget(s, cap, lo, dpoi, epsilon, tau, delta)


def largest_domain_within(
    max_cap: float, n_hat_frac: float, beta: float, delta: float, epsilon: float | None = None, constant: float = 1.0
) -> int:
    """Largest ``r_hat`` with a feasible delta split and a cap of at most ``max_cap`` (0 if none).

    For tiny domains the Poisson slack drives the budget and the cap is not
    monotone in ``r_hat``; once ``delta_poi`` is negligible the cap only grows,
    so the upward scan stops at the first such ``r_hat`` over ``max_cap``.
    """
    best = 0
    r = 1
    while True:
        b = sample_budget(r, n_hat_frac, beta, delta, epsilon, constant)
        if b.feasible and b.cap <= max_cap:
            best = r
        elif b.feasible and b.delta_poi < delta * 1e-3:
            return best
        r += 1


@dataclass
class ArrivalBuffer:
    """Arrivals observed so far (in arrival order) out of a population of ``n``."""

    n: int
    seen: list[VertexType] = field(default_factory=list)

    def __post_init__(self):
        if len(self.seen) > self.n:
            raise InvalidInput("buffer larger than the population")


def simulate_p(
    buffer: ArrivalBuffer, arrivals: Iterator[VertexType], s: int, rng: np.random.Generator
) -> tuple[list[VertexType], int]:
    """``s`` IID draws from the type distribution using a random-order stream.

    With ``i`` arrivals already buffered, a draw re-observes a uniform buffered
    arrival with probability ``i/n`` and otherwise pulls the next fresh one.
    Returns the samples and the number of fresh arrivals pulled (at most ``s``).
    """
    out: list[VertexType] = []
    fresh = 0
    n = buffer.n
    for _ in range(s):
        i = len(buffer.seen)
        if i and rng.random() < i / n:
            out.append(buffer.seen[int(rng.integers(i))])
            continue
        try:
            x = next(arrivals)
        except StopIteration:
            raise StreamExhausted(f"needed a fresh arrival after {i} of n={n}") from None
        buffer.seen.append(x)
        fresh += 1
        out.append(x)
    return out, fresh


def empirical_frequencies(samples: Sequence[VertexType], domain: ReducedDomain) -> np.ndarray:
    if not samples:
        raise InvalidInput("no samples")
    counts = np.zeros(len(domain))
    for x in samples:
        counts[domain.position(x)] += 1
    return counts / len(samples)


def empirical_l1(samples: Sequence[VertexType], q: np.ndarray, domain: ReducedDomain) -> float:
    """Plug-in estimate of ``L1(p, q)`` on the reduced domain."""
    return l1_reduced(empirical_frequencies(samples, domain), q)


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    passed: bool
    l1_hat: float
    consumed: int
    reason: str = ""


def minimax_test(
    budget: TestBudget,
    q: np.ndarray,
    domain: ReducedDomain,
    buffer: ArrivalBuffer,
    arrivals: Iterator[VertexType],
    rng: np.random.Generator,
) -> TestResult:
    """Pass iff the plug-in L1 estimate from ``Poisson(s)`` samples is below ``tau``."""
    s1 = poisson_sample(budget.s / 2, rng)
    s2 = poisson_sample(budget.s / 2, rng)
    total = s1 + s2
    if total > budget.cap:
        return TestResult(False, math.nan, 0, "poisson-overflow")
    if total == 0:
        return TestResult(False, math.nan, 0, "no-samples")
    before = len(buffer.seen)
    try:
        samples, fresh = simulate_p(buffer, arrivals, total, rng)
    except StreamExhausted as exc:
        return TestResult(False, math.nan, len(buffer.seen) - before, f"stream-exhausted: {exc}")
    l1_hat = empirical_l1(samples, q, domain)
    return TestResult(l1_hat < budget.tau, l1_hat, fresh, "" if l1_hat < budget.tau else "l1-above-threshold")
