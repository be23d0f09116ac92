import numpy as np
import pytest

from tamatch.advice import (
    NEW_TAG,
    AdviceBundle,
    SubsetIndex,
    _max_flow,
    brute_force_overlap,
    bucket_coarsen,
    bucket_membership,
    group_for_testing,
    patch_advice,
    remap_offline,
    remap_online,
)
from tamatch.core import TypeHistogram, VertexType, l1_histogram, vtype
from tamatch.matching import max_matching_size
from tamatch.selftest import random_histogram


def two_blocks(n):
    """Two complete blocks of size n/2 plus one distinct cross edge per online vertex."""
    half = n // 2
    types = [VertexType(list(range(half)) + [half + j]) for j in range(half)]
    types += [VertexType(list(range(half, n)) + [j]) for j in range(half)]
    return TypeHistogram.from_types(types, n)


class TestBundle:
    def test_slots_hold_a_maximum_matching(self, rng):
        for _ in range(100):
            n = int(rng.integers(1, 15))
            h = random_histogram(rng, n, p=0.2)
            b = AdviceBundle.from_histogram(h)
            b.check()
            assert b.n_hat == max_matching_size(h)
            for t, us in b.slots.items():
                matched = [u for u in us if u is not None]
                assert list(us[: len(matched)]) == matched  # matched slots first


class TestPatch:
    def test_perfect_advice_untouched(self, small_types):
        b = AdviceBundle.from_histogram(small_types)
        patched, rec = patch_advice(b)
        assert patched is b and rec.empty

    def test_star(self):
        h = TypeHistogram({vtype(0): 3}, 3)
        patched, rec = patch_advice(AdviceBundle.from_histogram(h))
        assert rec.k == 2 and rec.unmatched_offline == (1, 2)
        assert patched.histogram[rec.new_label] == 2 and patched.histogram[vtype(0)] == 1
        assert rec.new_label.tag == NEW_TAG and rec.new_label.neighbors == (1, 2)
        patched.check()
        assert patched.n_hat == 3

    def test_identities_on_random_pairs(self, rng):
        for _ in range(1000):
            n = int(rng.integers(1, 21))
            c_star, c_hat = random_histogram(rng, n, p=0.25), random_histogram(rng, n, p=0.15)
            b = AdviceBundle.from_histogram(c_hat)
            patched, rec = patch_advice(b)
            k = n - b.n_hat
            assert rec.k == k
            assert sum(patched.histogram.values()) == n
            assert max_matching_size(patched.histogram) == n
            assert l1_histogram(c_hat, patched.histogram) == 2 * k
            assert l1_histogram(c_star, patched.histogram) <= l1_histogram(c_star, c_hat) + 2 * k
            if k:
                assert len(patched.histogram) == len(c_hat) + 1 - len(rec.dropped_labels)
                assert len(rec.unmatched_slots) == k


class TestBucket:
    @pytest.mark.parametrize("n", [4, 10, 40])
    def test_two_block_construction(self, n):
        h = two_blocks(n)
        res = bucket_coarsen(AdviceBundle.from_histogram(h), target_r=2)
        half = n // 2
        assert res.reached_target
        assert set(res.bundle.histogram) == {VertexType(range(half)), VertexType(range(half, n))}
        assert res.bundle.n_hat == n
        membership = bucket_membership(res)
        assert all(label.issubset(t) for t, label in membership.items())

    def test_single_type_unchanged(self):
        h = TypeHistogram({vtype(0, 1): 2}, 2)
        res = bucket_coarsen(AdviceBundle.from_histogram(h), target_r=1)
        assert res.bundle.histogram == h and res.merges == 0 and res.reached_target

    def test_empty_intersections_are_never_merged(self):
        h = TypeHistogram({vtype(0): 1, vtype(1): 1, vtype(2): 1}, 3)
        res = bucket_coarsen(AdviceBundle.from_histogram(h), target_r=1)
        assert not res.reached_target and res.bundle.histogram == h

    def test_count_threshold(self):
        h = TypeHistogram({vtype(0, 1): 1, vtype(0, 2): 1, vtype(0, 1, 2): 4}, 6)
        res = bucket_coarsen(AdviceBundle.from_histogram(h), count_threshold=2)
        assert res.reached_target
        assert all(c >= 2 for c in res.bundle.histogram.values())

    def test_needs_a_goal(self, small_types):
        with pytest.raises(ValueError):
            bucket_coarsen(AdviceBundle.from_histogram(small_types))
        with pytest.raises(ValueError):
            bucket_coarsen(AdviceBundle.from_histogram(small_types), target_r=0)

    def test_random_advice_invariants(self, rng):
        for _ in range(500):
            n = int(rng.integers(1, 16))
            h = random_histogram(rng, n, p=0.5)
            b = AdviceBundle.from_histogram(h)
            target = int(rng.integers(1, len(h) + 1))
            res = bucket_coarsen(b, target_r=target)
            out = res.bundle
            assert sum(out.histogram.values()) == n
            assert len(out.histogram) <= len(h)
            assert out.n_hat <= b.n_hat
            assert res.reached_target == (len(out.histogram) <= target)
            for label, members in res.members.items():
                assert sum(h[m] for m in members) == out.histogram[label]
                assert all(label.issubset(m) for m in members)


class TestGrouping:
    def test_respects_target(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 40))
            h = random_histogram(rng, n, p=0.3)
            target = int(rng.integers(1, 10))
            g = group_for_testing(h, target)
            assert set(g) == set(h)
            assert len(set(g.values())) <= max(target, 1)

    def test_heavy_labels_keep_their_own_position(self):
        heavy = vtype(0, 1)
        h = TypeHistogram({heavy: 10, **{vtype(i): 1 for i in range(2, 12)}}, 20)
        g = group_for_testing(h, 3)
        assert g[heavy] == heavy
        assert len(set(g.values())) == 3

    def test_small_support_is_identity(self, small_types):
        assert group_for_testing(small_types, 5) == {t: t for t in small_types}


class TestRemapOffline:
    def test_disjoint_example_gets_full_overlap(self, small_types, disjoint_advice):
        remap, value = remap_offline(small_types, disjoint_advice)
        assert value == 4
        remap.check(small_types, disjoint_advice)
        # following the advice matching through the remapping is a perfect matching
        bundle = AdviceBundle.from_histogram(disjoint_advice)
        assert bundle.n_hat == 4
        left = {t: list(us) for t, us in bundle.slots.items()}
        used = set()
        for (t, _), label in remap.assignment.items():
            u = left[label].pop(0)
            assert u in t and u not in used
            used.add(u)
        assert len(used) == 4

    def test_identity(self, rng):
        h = random_histogram(rng, 8)
        remap, value = remap_offline(h, h)
        assert value == 8

    def test_equals_exhaustive(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 7))
            a, b = random_histogram(rng, n, 4), random_histogram(rng, n, 4)
            remap, value = remap_offline(a, b)
            remap.check(a, b)
            assert value == remap.mapped == brute_force_overlap(a, b)

    def test_flow_monotone_in_edges(self, rng):
        for _ in range(200):
            size = int(rng.integers(3, 8))
            cap = [dict() for _ in range(size)]
            for _ in range(int(rng.integers(1, 15))):
                u, v = rng.choice(size, 2, replace=False)
                cap[int(u)][int(v)] = int(rng.integers(1, 5))
            base, _ = _max_flow(cap, 0, size - 1)
            u, v = rng.choice(size, 2, replace=False)
            cap[int(u)][int(v)] = cap[int(u)].get(int(v), 0) + int(rng.integers(1, 5))
            assert _max_flow(cap, 0, size - 1)[0] >= base


class TestRemapOnline:
    def test_largest_subset_first(self):
        remaining = {vtype(1, 3): 1, vtype(3): 1}
        assert remap_online(vtype(0, 1, 3), remaining) == vtype(1, 3)
        remaining[vtype(1, 3)] = 0
        assert remap_online(vtype(0, 1, 3), remaining) == vtype(3)

    def test_unmapped(self):
        assert remap_online(vtype(0), {vtype(1): 2}) is None
        assert remap_online(vtype(0), {vtype(0): 0}) is None

    def test_exact_type_is_its_own_image(self):
        assert remap_online(vtype(0, 2), {vtype(0, 2): 1, vtype(0): 5}) == vtype(0, 2)

    def test_ties_by_count_then_label(self):
        assert remap_online(vtype(0, 1), {vtype(0): 1, vtype(1): 3}) == vtype(1)
        assert remap_online(vtype(0, 1), {vtype(0): 2, vtype(1): 2}) == vtype(0)

    def test_index_paths_agree(self, rng):
        labels = [VertexType(np.flatnonzero(rng.random(12) < 0.2)) for _ in range(300)]
        labels.append(VertexType((1, 2), tag=NEW_TAG))
        idx = SubsetIndex(labels)
        for _ in range(100):
            arrival = VertexType(np.flatnonzero(rng.random(12) < 0.4))
            fast = set(idx.candidates(arrival))
            slow = {t for t in set(labels) if t.issubset(arrival)}
            assert fast == slow
