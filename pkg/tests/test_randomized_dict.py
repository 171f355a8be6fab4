import pytest
import sys
import os
import random
from bisect import bisect_left

# Add the parent directory to the path so we can import from src
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.fingerdict.randomized_dict import (
    RandomizedFingerDict,
    criticality,
    delete_at,
    finger_search,
    fullness,
    insert_at,
    maintenance_round,
    r_bucket_target,
    rebalance,
)
from src.fingerdict.exceptions import DuplicateKey, KeyAbsent, KeyOutOfFingerRange, StaleFinger
from src.fingerdict.oracle import OracleDict

KEY_STEP = 1000

# 65522 keys give a bucket target of exactly 16 and leave room for 14 more
TARGET_16_KEYS = 65522


def target_16_dict():
    """Dictionary with target 16 whose maintenance never runs on its own."""
    keys = [KEY_STEP * (i + 1) for i in range(TARGET_16_KEYS)]
    rdict = RandomizedFingerDict.from_sorted(keys, alpha=1000, seed=1)
    assert rdict.target == 16
    return rdict


def grow(rdict, bucket, count):
    last = bucket.elements[-1]
    finger = rdict.finger_of(last)
    for j in range(1, count + 1):
        finger = rdict.insert_at(finger, last + j)


def shrink_to(rdict, bucket, size):
    for key in list(bucket.elements[size:]):
        rdict.delete_at(rdict.finger_of(key))


def inner_bucket(rdict, size):
    return next(b for b in rdict.buckets() if len(b) == size and b.prev is not None and b.next is not None)


class TestFormulas:
    """Test the bucket target, fullness and criticality formulas."""

    @pytest.mark.parametrize("n, expected", [(4, 8), (1 << 16, 16), (1 << 40, 29)])
    def test_bucket_target(self, n, expected):
        assert r_bucket_target(n) == expected

    @pytest.mark.parametrize("size, expected", [(16, 1.0), (8, 0.5), (32, 2.0)])
    def test_fullness(self, size, expected):
        assert fullness(size, 1 << 16) == expected

    @pytest.mark.parametrize("size, expected", [(16, 0.0), (8, 0.4), (30, 0.15)])
    def test_criticality(self, size, expected):
        assert criticality(size, 1 << 16, alpha=2) == pytest.approx(expected)

    def test_target_needs_positive_count(self):
        with pytest.raises(ValueError):
            r_bucket_target(0)


class TestInsertDelete:
    """Test finger insertions and deletions."""

    def test_insert_after_finger(self):
        """
        Given keys [10, 20, 30]
        When 15 is inserted after the finger on 10
        Then the keys should be [10, 15, 20, 30]
        """
        rdict = RandomizedFingerDict.from_sorted([10, 20, 30])
        finger = insert_at(rdict, rdict.finger_of(10), 15)
        assert finger.key == 15
        assert rdict.keys() == [10, 15, 20, 30]
        assert rdict.validate().ok

    def test_insert_beyond_successor(self):
        rdict = RandomizedFingerDict.from_sorted([10, 20, 30])
        with pytest.raises(KeyOutOfFingerRange):
            rdict.insert_at(rdict.finger_of(10), 25)

    def test_insert_duplicate(self):
        rdict = RandomizedFingerDict.from_sorted([10, 20, 30])
        with pytest.raises(DuplicateKey):
            rdict.insert_at(rdict.finger_of(10), 20)

    def test_insert_front_and_into_empty(self):
        rdict = RandomizedFingerDict()
        rdict.insert_at(None, 50)
        rdict.insert_at(None, 40)
        with pytest.raises(KeyOutOfFingerRange):
            rdict.insert_at(None, 45)
        assert rdict.keys() == [40, 50]
        assert rdict.max_key() == 50

    def test_delete_then_search(self):
        """
        Given keys [10, 20, 30]
        When 20 is deleted
        Then searching for 20 should raise KeyAbsent and the deleted finger be stale
        """
        rdict = RandomizedFingerDict.from_sorted([10, 20, 30])
        gone = rdict.finger_of(20)
        assert delete_at(rdict, gone) == 20
        with pytest.raises(KeyAbsent):
            finger_search(rdict, rdict.finger_of(10), 20)
        with pytest.raises(StaleFinger):
            rdict.delete_at(gone)

    def test_out_of_universe_keys_rejected(self):
        rdict = RandomizedFingerDict.from_sorted([10])
        with pytest.raises(KeyOutOfFingerRange):
            rdict.insert_at(rdict.finger_of(10), 1 << 64)


class TestRebalance:
    """Test split, transfer and fuse on a dictionary with target 16."""

    def test_split_into_halves(self):
        """
        Given a bucket grown to 30 elements at n = 2^16
        When it is rebalanced
        Then it should split into two buckets of 15
        """
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        grow(rdict, bucket, 14)
        assert len(bucket) == 30
        assert rebalance(rdict, bucket) == 'split'
        assert len(bucket) == 15
        assert len(bucket.next) == 15
        assert rdict.validate().ok

    def test_transfer_equalizes(self):
        """
        Given a bucket of 8 with a next neighbor of 24
        When it is rebalanced
        Then elements should move so both hold 16
        """
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        neighbor = bucket.next
        shrink_to(rdict, bucket, 8)
        grow(rdict, neighbor, 24 - len(neighbor))
        assert rebalance(rdict, bucket) == 'transfer'
        assert (len(bucket), len(neighbor)) == (16, 16)
        assert rdict.validate().ok

    def test_fuse_with_small_neighbor(self):
        """
        Given the first bucket at 8 with a next neighbor of 12
        When it is rebalanced
        Then the two should fuse into one bucket of 20
        And a finger into the absorbed bucket should still work
        """
        rdict = target_16_dict()
        head = rdict.head
        neighbor = head.next
        shrink_to(rdict, head, 8)
        shrink_to(rdict, neighbor, 12)
        kept = neighbor.elements[5]
        finger = rdict.finger_of(kept)
        assert rebalance(rdict, head) == 'fuse'
        assert len(head) == 20
        assert neighbor.merged_into is head
        assert rdict.finger_search(finger, kept).key == kept
        assert rdict.validate().ok

    def test_noncritical_round_takes_no_action(self):
        rdict = RandomizedFingerDict.from_sorted(range(0, 64000, 1000))
        report = maintenance_round(rdict)
        assert report.actions == []

    def test_oversized_bucket_is_split_by_maintenance(self):
        """
        Given a bucket grown to 31 elements just past n = 2^16 (target 17)
        When a maintenance round runs
        Then a split should be reported for it
        """
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        grow(rdict, bucket, 15)
        assert rdict.target == 17
        finger = rdict.finger_of(bucket.elements[0])
        report = rdict.maintenance_round()
        assert any(action == 'split' for _, _, action in report.actions)
        assert rdict.finger_search(finger, finger.key).key == finger.key
        assert rdict.pending_rebalances == 1
        rdict.drain()
        assert (len(bucket), len(bucket.next)) == (16, 15)
        assert rdict.validate().ok


class TestSpreadMaintenance:
    """Test that queued rebalances run a bounded slice per update."""

    def test_split_runs_a_slice_per_update(self):
        """
        Given a bucket of 31 scheduled for a split by a maintenance round
        When updates elsewhere follow one at a time
        Then each update should move at most slice_units elements
        And the split should finish over several updates
        """
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        grow(rdict, bucket, 15)
        report = rdict.maintenance_round()
        assert ('random', bucket.representative, 'split') in report.actions
        assert len(bucket) == 31

        finger = rdict.finger_of(rdict.head.elements[0])
        updates = 0
        while rdict.pending_rebalances:
            finger = rdict.insert_at(finger, finger.key + 1)
            updates += 1
            assert rdict.meter.max_by_category['move'] <= rdict.slice_units
        assert updates > 1
        assert (len(bucket), len(bucket.next)) == (16, 15)
        assert rdict.validate().ok

    def test_every_step_leaves_keys_searchable(self):
        """
        Given a scheduled split of a 31-element bucket
        When its steps run one at a time
        Then after each step the dictionary should validate and find every key of the bucket
        """
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        grow(rdict, bucket, 15)
        keys = list(bucket.elements)
        finger = rdict.finger_of(keys[0])
        rdict.maintenance_round()
        while rdict.pending_rebalances:
            rdict.pump(1)
            assert rdict.validate().ok
            for key in keys:
                assert rdict.finger_search(finger, key).key == key

    def test_unfinished_work_completes_at_next_round(self):
        rdict = target_16_dict()
        bucket = inner_bucket(rdict, 16)
        grow(rdict, bucket, 15)
        rdict.maintenance_round()
        rdict.maintenance_round()
        assert rdict.overdue_rounds == 1
        assert rdict.pending_rebalances == 0
        assert (len(bucket), len(bucket.next)) == (16, 15)

    def test_random_growth_moves_within_slice(self):
        """
        Given 8000 spaced keys under insert-heavy random updates
        When maintenance splits the buckets that grow too large
        Then no single update should move more than slice_units elements
        And no round should find work left over from the previous one
        """
        keys = [(i + 1) << 32 for i in range(8000)]
        rdict = RandomizedFingerDict.from_sorted(keys, seed=12)
        oracle = OracleDict(keys)
        random_updates(rdict, oracle, random.Random(12), 6000, insert_p=0.8)
        assert rdict.meter.by_category['move'] > 0
        assert rdict.meter.max_by_category['move'] <= rdict.slice_units
        assert rdict.overdue_rounds == 0
        assert rdict.keys() == oracle.keys
        assert rdict.validate().ok


def random_updates(rdict, oracle, rng, count, insert_p=0.5, search_p=0.0, on_round=None):
    """Apply random finger updates to both structures, checking searches as it goes."""
    for _ in range(count):
        keys = oracle.keys
        roll = rng.random()
        if roll < search_p and keys:
            f = rng.randrange(len(keys))
            t = rng.randrange(len(keys))
            assert rdict.finger_search(rdict.finger_of(keys[f]), keys[t]).key == keys[t]
        elif roll < search_p + insert_p * (1 - search_p) or not keys:
            if not keys or rng.random() < 0.02:
                if keys and keys[0] == 0:
                    continue
                key = rng.randrange(0, keys[0]) if keys else rng.randrange(1 << 63)
                oracle.insert(key)
                rdict.insert_at(None, key)
            else:
                i = rng.randrange(len(keys))
                low = keys[i]
                high = keys[i + 1] if i + 1 < len(keys) else low + (1 << 32)
                if high - low < 2:
                    continue
                key = rng.randrange(low + 1, high)
                oracle.insert(key)
                rdict.insert_at(rdict.finger_of(low), key)
        else:
            key = keys[rng.randrange(len(keys))]
            oracle.delete(key)
            rdict.delete_at(rdict.finger_of(key))
        if on_round is not None:
            on_round()


class TestDifferential:
    """Differential runs against the sorted-array oracle."""

    def test_random_inserts_match_oracle(self):
        rng = random.Random(31)
        rdict = RandomizedFingerDict(seed=31)
        oracle = OracleDict()
        random_updates(rdict, oracle, rng, 5000, insert_p=1.0)
        assert rdict.keys() == oracle.keys
        result = rdict.validate()
        assert result.ok, result.violation

    def test_mixed_updates_keep_thresholds(self):
        """
        Given 8000 spaced keys
        When 10^4 random inserts, deletes and searches run
        Then contents should match the oracle
        And at every maintenance boundary no bucket should leave [0.5, 2] times the target
        """
        keys = [(i + 1) << 32 for i in range(8000)]
        rdict = RandomizedFingerDict.from_sorted(keys, seed=4)
        oracle = OracleDict(keys)
        rng = random.Random(4)
        seen = [rdict.rounds]

        def check_round():
            if rdict.rounds != seen[0]:
                seen[0] = rdict.rounds
                assert rdict.fullness_violations() == []

        random_updates(rdict, oracle, rng, 10000, insert_p=0.5, search_p=0.2, on_round=check_round)
        assert rdict.keys() == oracle.keys
        assert rdict.validate().ok
        assert rdict.rounds > 0

    def test_update_work_is_constant_per_update(self):
        keys = [(i + 1) << 32 for i in range(4096)]
        rdict = RandomizedFingerDict.from_sorted(keys, seed=8)
        oracle = OracleDict(keys)
        random_updates(rdict, oracle, random.Random(8), 4000, insert_p=0.6)
        assert rdict.meter.per_update() < 200

    def test_seeded_runs_are_identical(self):
        """
        Given two dictionaries with the same seed
        When the same update sequence runs on both
        Then their action logs and contents should be identical
        """
        logs = []
        for _ in range(2):
            keys = [(i + 1) << 32 for i in range(2000)]
            rdict = RandomizedFingerDict.from_sorted(keys, seed=77)
            random_updates(rdict, OracleDict(keys), random.Random(77), 3000, insert_p=0.7)
            logs.append(([report.actions for report in rdict.action_log], rdict.keys()))
        assert logs[0] == logs[1]


class TestFingerSearch:
    """Test finger search through buckets and the top tree."""

    def test_same_bucket_needs_no_tree_probes(self):
        rdict = RandomizedFingerDict.from_sorted(range(0, 10000, 10))
        bucket = rdict.head.next
        finger = rdict.finger_of(bucket.elements[0])
        assert rdict.finger_search(finger, bucket.elements[-1]).key == bucket.elements[-1]
        assert rdict.last_tree_probes == 0

    def test_adjacent_bucket_uses_one_neighbor_check(self):
        rdict = RandomizedFingerDict.from_sorted(range(0, 10000, 10))
        bucket = rdict.head.next
        finger = rdict.finger_of(bucket.elements[-1])
        target = bucket.next.elements[0]
        assert rdict.finger_search(finger, target).key == target
        assert 0 < rdict.last_tree_probes <= 3

    def test_searches_match_oracle(self):
        keys = sorted(random.Random(12).sample(range(1 << 40), 20000))
        rdict = RandomizedFingerDict.from_sorted(keys, seed=12)
        rng = random.Random(13)
        for _ in range(2000):
            f = keys[rng.randrange(len(keys))]
            s = rng.randrange(1 << 40)
            i = bisect_left(keys, s)
            if i < len(keys) and keys[i] == s:
                assert rdict.finger_search(rdict.finger_of(f), s).key == s
            else:
                with pytest.raises(KeyAbsent):
                    rdict.finger_search(rdict.finger_of(f), s)

    def test_stale_finger_after_delete(self):
        rdict = RandomizedFingerDict.from_sorted(range(100))
        finger = rdict.finger_of(50)
        rdict.delete_at(finger)
        with pytest.raises(StaleFinger):
            rdict.finger_search(finger, 10)


@pytest.mark.slow
class TestDistanceSensitivity:
    """Mean probes grow with rank distance."""

    def test_near_searches_cost_less(self):
        n = 1 << 18
        keys = [(i + 1) * KEY_STEP for i in range(n)]
        rdict = RandomizedFingerDict.from_sorted(keys, seed=5)
        rng = random.Random(5)
        means = {}
        for d in (1 << 4, 1 << 14):
            total = 0
            for _ in range(2000):
                f = rng.randrange(n - d)
                rdict.finger_search(rdict.finger_of(keys[f]), keys[f + d])
                total += rdict.last_probes
            means[d] = total / 2000
        assert means[1 << 4] < means[1 << 14]

    def test_probes_at_fixed_distance_do_not_grow_with_n(self):
        """
        Given dictionaries of 2^12 and 2^16 keys
        When searching at rank distance 16
        Then the mean probe counts should be within 50% of each other
        """
        means = []
        for n in (1 << 12, 1 << 16):
            keys = [(i + 1) * KEY_STEP for i in range(n)]
            rdict = RandomizedFingerDict.from_sorted(keys, seed=6)
            rng = random.Random(n)
            total = 0
            for _ in range(2000):
                f = rng.randrange(n - 16)
                rdict.finger_search(rdict.finger_of(keys[f]), keys[f + 16])
                total += rdict.last_probes
            means.append(total / 2000)
        small, large = means
        assert abs(large - small) <= 0.5 * small
