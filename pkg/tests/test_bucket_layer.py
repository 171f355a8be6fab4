import pytest
import sys
import os
import random

# Add the parent directory to the path so we can import from src
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.fingerdict.bucket_layer import (
    TailFingerDict,
    TailHandle,
    bucket_capacity,
    global_rebuild_step,
    search_star,
)
from src.fingerdict.exceptions import EmptyStructure, KeyAbsent, KeyNotGreaterThanMax, StaleFinger
from src.fingerdict.oracle import OracleDict


def fixed_capacity(capacity):
    return lambda n: capacity


class TestBucketCapacity:
    """Test the bucket size schedule."""

    @pytest.mark.parametrize("n, expected", [(1, 4), (4, 4), (1 << 16, 4), (1 << 17, 5), (1 << 40, 6)])
    def test_schedule(self, n, expected):
        assert bucket_capacity(n) == expected

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            bucket_capacity(0)


class TestInsertTail:
    """Test tail insertions into the bucketed dictionary."""

    def test_fifth_key_opens_second_bucket(self):
        """
        Given a dictionary with bucket capacity 4
        When 1, 2, 3, 4, 5 are inserted
        Then the buckets should be [1,2,3,4] and [5]
        And the second representative should be queued or already placed
        """
        tail = TailFingerDict(capacity_fn=fixed_capacity(4))
        for key in range(1, 6):
            tail.insert_tail(key)
        assert [bucket.elements for bucket in tail.buckets] == [[1, 2, 3, 4], [5]]
        tail.drain()
        assert tail.forest.keys() == [1, 5]
        assert tail.represented == 2
        assert tail.validate().ok

    def test_insert_into_empty(self):
        tail = TailFingerDict()
        handle = tail.insert_tail(42)
        assert handle == TailHandle(0, 42)
        assert len(tail.buckets) == 1
        assert tail.resolve(handle) == 0

    def test_insert_duplicate_rejected(self):
        tail = TailFingerDict()
        tail.insert_tail(10)
        with pytest.raises(KeyNotGreaterThanMax):
            tail.insert_tail(10)

    def test_spread_work_per_update_is_bounded(self):
        """
        Given an empty dictionary
        When 5000 keys are inserted at the tail
        Then no update should spend more than the spread budget on the forest
        """
        tail = TailFingerDict(capacity_fn=fixed_capacity(4))
        for key in range(5000):
            tail.insert_tail(key)
        assert tail.meter.by_category['spread'] <= tail.spread_budget * 5000
        assert tail.meter.max_update <= tail.spread_budget + 2
        tail.drain()
        assert tail.validate().ok


class TestDeleteTail:
    """Test tail deletions from the bucketed dictionary."""

    def test_delete_retires_empty_bucket(self):
        """
        Given the keys 1..5 with bucket capacity 4
        When the tail is deleted
        Then 5 should be returned and the single bucket [1,2,3,4] remain
        """
        tail = TailFingerDict(capacity_fn=fixed_capacity(4))
        for key in range(1, 6):
            tail.insert_tail(key)
        assert tail.delete_tail() == 5
        assert [bucket.elements for bucket in tail.buckets] == [[1, 2, 3, 4]]
        tail.drain()
        assert tail.forest.keys() == [1]
        assert tail.validate().ok

    def test_churn_at_forest_capacity(self):
        """
        Given 256 full buckets, filling a height-4 forest of representatives
        When a bucket is opened and retired 40 times
        Then the forest should rebuild at most once and the queue drain
        """
        tail = TailFingerDict.from_sorted(range(1024), capacity_fn=fixed_capacity(4))
        before = tail.forest.rebuilds
        for key in range(2000, 2040):
            tail.insert_tail(key)
            assert tail.delete_tail() == key
        tail.drain()
        assert tail.forest.rebuilds - before <= 1
        assert not tail.spread_queue
        assert tail.keys() == list(range(1024))
        result = tail.validate()
        assert result.ok, result.violation

    def test_delete_singleton(self):
        tail = TailFingerDict()
        tail.insert_tail(9)
        assert tail.delete_tail() == 9
        assert len(tail) == 0
        assert tail.keys() == []

    def test_delete_from_empty(self):
        with pytest.raises(EmptyStructure):
            TailFingerDict().delete_tail()

    def test_interleaved_updates_validate(self):
        """
        Given an empty dictionary with bucket capacity 4
        When random tail inserts and deletes are interleaved
        Then contents should match a list and the structure validate after draining
        """
        tail = TailFingerDict(capacity_fn=fixed_capacity(4))
        expected = []
        rng = random.Random(3)
        key = 0
        for _ in range(3000):
            if expected and rng.random() < 0.4:
                assert tail.delete_tail() == expected.pop()
            else:
                key += rng.randrange(1, 50)
                tail.insert_tail(key)
                expected.append(key)
        assert tail.keys() == expected
        tail.drain()
        result = tail.validate()
        assert result.ok, result.violation


class TestSearchStar:
    """Test finger search through buckets and the forest."""

    def test_same_bucket_needs_no_forest_probes(self):
        tail = TailFingerDict.from_sorted(range(0, 400, 4), capacity_fn=fixed_capacity(4))
        found = tail.search_star(tail.handle_at(8), 44)
        assert found == TailHandle(11, 44)
        assert tail.last_forest_probes == 0

    def test_target_in_unrepresented_suffix(self):
        """
        Given a dictionary whose newest buckets are not yet in the forest
        When searching from the first element for a key in the last bucket
        Then the key should be found by direct access without forest probes
        """
        tail = TailFingerDict(steps_per_update=2, capacity_fn=fixed_capacity(4))
        for key in range(200):
            tail.insert_tail(key)
        assert tail.spread_queue or tail.represented == len(tail.buckets)
        last = tail.keys()[-1]
        assert tail.search_star(tail.handle_at(0), last) == TailHandle(199, last)
        assert tail.last_forest_probes == 0

    def test_far_search_matches_oracle(self):
        """
        Given 4096 keys
        When searching from rank 100 for the key at rank 3000
        Then the handle should match the oracle's rank
        """
        keys = [5 * i + 1 for i in range(4096)]
        tail = TailFingerDict.from_sorted(keys)
        oracle = OracleDict(keys)
        found = search_star(tail, tail.handle_at(99), keys[2999])
        rank, _ = oracle.finger_search(100, keys[2999])
        assert found == TailHandle(rank - 1, keys[2999])
        assert tail.last_forest_probes > 0

    def test_every_pair_at_256_keys(self):
        """
        Given 256 keys under the default bucket schedule
        When searching from every finger for every key
        Then each search should return the target's rank and key
        """
        keys = [7 * i + 3 for i in range(256)]
        tail = TailFingerDict.from_sorted(keys)
        for f in range(256):
            for t in range(256):
                assert tail.search_star(tail.handle_at(f), keys[t]) == TailHandle(t, keys[t])

    def test_absent_key(self):
        tail = TailFingerDict.from_sorted([10, 20, 30, 40, 50, 60])
        with pytest.raises(KeyAbsent):
            tail.search_star(tail.handle_at(0), 35)
        with pytest.raises(KeyAbsent):
            tail.search_star(tail.handle_at(5), 5)

    def test_stale_finger(self):
        tail = TailFingerDict.from_sorted([10, 20, 30])
        handle = tail.handle_at(2)
        tail.delete_tail()
        with pytest.raises(StaleFinger):
            tail.search_star(handle, 10)

    def test_searches_during_spreading(self):
        """
        Given a dictionary growing at the tail with a small spread budget
        When random searches run between inserts
        Then every search should match the stored rank
        """
        tail = TailFingerDict(steps_per_update=2, capacity_fn=fixed_capacity(4))
        keys = []
        rng = random.Random(17)
        for i in range(1500):
            key = 2 * i + 1
            tail.insert_tail(key)
            keys.append(key)
            f = rng.randrange(len(keys))
            t = rng.randrange(len(keys))
            assert tail.search_star(tail.handle_at(f), keys[t]) == TailHandle(t, keys[t])


class TestGlobalRebuild:
    """Test the incremental global rebuild."""

    def test_no_rebuild_without_capacity_change(self):
        """
        Given 16 keys at capacity 4
        When the dictionary grows to 40 keys
        Then no global rebuild should start
        """
        tail = TailFingerDict.from_sorted(range(16))
        for key in range(16, 40):
            tail.insert_tail(key)
        assert not tail.rebuild_in_progress
        assert tail.global_rebuilds == 0

    def test_quiescent_calls_are_noops(self):
        tail = TailFingerDict.from_sorted(range(16))
        before = tail.keys()
        for _ in range(5):
            global_rebuild_step(tail)
        assert tail.keys() == before
        assert tail.global_rebuilds == 0

    def test_rebuild_on_capacity_change(self):
        """
        Given a dictionary whose capacity schedule jumps from 4 to 6 past 64 keys
        When it grows well past twice its size at the last window check
        Then a rebuild should complete, move to capacity 6, and keep every key
        """
        schedule = lambda n: 4 if n <= 64 else 6
        tail = TailFingerDict.from_sorted(range(40), capacity_fn=schedule)
        oracle_keys = list(range(40))
        for key in range(40, 600):
            tail.insert_tail(key)
            oracle_keys.append(key)
            if key % 37 == 0:
                assert tail.search_star(tail.handle_at(0), key) == TailHandle(key, key)
        assert tail.global_rebuilds >= 1
        assert tail.capacity == 6
        assert tail.keys() == oracle_keys
        tail.drain()
        assert tail.validate().ok
        total = tail.meter.by_category.get('rebuild', 0)
        assert total <= 100 * len(tail)

    def test_rebuild_survives_deletions(self):
        schedule = lambda n: 4 if n <= 64 else 6
        tail = TailFingerDict.from_sorted(range(40), capacity_fn=schedule)
        expected = list(range(40))
        rng = random.Random(23)
        key = 40
        for _ in range(2000):
            if rng.random() < 0.35 and expected:
                assert tail.delete_tail() == expected.pop()
            else:
                tail.insert_tail(key)
                expected.append(key)
                key += 1
        assert tail.keys() == expected
        tail.drain()
        assert tail.validate().ok


@pytest.mark.slow
class TestScaling:
    """Probe counts and space as n grows from 2^12 to 2^16."""

    @staticmethod
    def mean_probes_at_distance(tail, keys, d, rng, searches=2000):
        total = 0
        for _ in range(searches):
            f = rng.randrange(len(keys) - d)
            tail.search_star(tail.handle_at(f), keys[f + d])
            total += tail.last_probes
        return total / searches

    def test_probes_at_fixed_distance_do_not_grow_with_n(self):
        """
        Given dictionaries of 2^12 and 2^16 keys
        When searching at rank distance 16
        Then the mean probe counts should be within 50% of each other
        """
        means = []
        for n in (1 << 12, 1 << 16):
            keys = [3 * i + 1 for i in range(n)]
            tail = TailFingerDict.from_sorted(keys)
            means.append(self.mean_probes_at_distance(tail, keys, 16, random.Random(n)))
        small, large = means
        assert abs(large - small) <= 0.5 * small

    def test_space_per_key_is_constant(self):
        ratios = []
        for n in (1 << 12, 1 << 16):
            tail = TailFingerDict.from_sorted(range(0, 2 * n, 2))
            ratios.append(tail.space_cells() / n)
        assert ratios[1] <= 1.5 * ratios[0]
        assert ratios[0] <= 1.5 * ratios[1]
