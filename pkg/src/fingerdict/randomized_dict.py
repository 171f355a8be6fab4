"""
Randomized bucketed finger-search dictionary for arbitrary-position updates.

Keys live in buckets of target size Theta(log^2 log n) chained in key order;
each bucket is represented in a LevelLinkedTree by a separator key (0 for
the first bucket, otherwise a key no larger than the bucket's elements and
larger than every element of the previous bucket). Every c = alpha *
ceil(log2 log2 n_max) updates a maintenance round checks one bucket drawn
with probability proportional to its update count in the round, and then
the most critical bucket, and queues a rebalance (split, transfer or fuse)
for each critical one. Rebalances run as generators of unit steps, a few
per update, so no single update pays for a whole split or fuse.
"""
import logging
import math
import random
from collections import deque
from bisect import bisect_left, insort
from dataclasses import dataclass, field
from typing import List

from .exceptions import (DuplicateKey, EmptyStructure, InvariantViolation, KeyAbsent,
                         KeyOutOfFingerRange, StaleFinger)
from .nested_bdt import ValidationResult
from .predecessor_index import check_sorted, counted_predecessor
from .statistics import WorkMeter
from .top_tree import DEFAULT_FANOUT, LevelLinkedTree

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 2
KEY_LIMIT = 1 << 64
MAX_REBALANCE_PASSES = 8


def loglog(n):
    """ceil(log2 log2 max(n, 4))."""
    return math.ceil(math.log2(math.log2(max(n, 4))))


def r_bucket_target(n):
    """
    Target bucket size max(8, ceil((log2 log2 max(n, 4))^2)).

    Args:
        n (int): Key count, n >= 1.
    """
    if n < 1:
        raise ValueError(f"Key count must be positive, got {n}")
    return max(8, math.ceil(math.log2(math.log2(max(n, 4))) ** 2))


def _size(b):
    return b if isinstance(b, int) else len(b)


def fullness(b, n):
    """|b| / r_bucket_target(n); b may be a bucket or a size."""
    return _size(b) / r_bucket_target(n)


def criticality(b, n, alpha=DEFAULT_ALPHA):
    """
    Normalized distance of |b| beyond the 0.7 and 1.8 fullness thresholds.

    Returns:
        float: max{0, 0.7*L2 - |b|, |b| - 1.8*L2} / (alpha * ceil(log2 log2 n)),
        positive exactly when b is critical.
    """
    size = _size(b)
    target = r_bucket_target(n)
    excess = max(0.0, 0.7 * target - size, size - 1.8 * target)
    return excess / (alpha * loglog(n))


def _below(size, target):
    return 10 * size < 7 * target


def _above(size, target):
    return 10 * size > 18 * target


class RBucket:
    """Sorted run of keys with its separator leaf in the top tree."""

    __slots__ = ('elements', 'delta', 'prev', 'next', 'leaf', 'merged_into', 'epoch')

    def __init__(self, elements=None):
        self.elements = elements if elements is not None else []
        self.delta = 0
        self.prev = None
        self.next = None
        self.leaf = None
        self.merged_into = None
        self.epoch = 0

    def __len__(self):
        return len(self.elements)

    @property
    def representative(self):
        return self.leaf.key


@dataclass(frozen=True)
class RFinger:
    """Finger: a stored key, the bucket it was seen in, and that bucket's epoch."""
    key: int
    bucket: RBucket = field(compare=False, repr=False)
    epoch: int = 0


class _RebalanceJob:
    """Queued rebalance of one bucket."""

    __slots__ = ('bucket', 'steps')

    def __init__(self, bucket):
        self.bucket = bucket
        self.steps = None


@dataclass
class MaintenanceReport:
    round: int
    actions: List[tuple] = field(default_factory=list)


class RandomizedFingerDict:
    """
    Finger-search dictionary with expected O(1) updates.

    Args:
        alpha (int): Maintenance cadence multiplier.
        seed (int): Seed of the random-check generator.
        fanout (int): Top-tree fanout.
    """

    def __init__(self, alpha=DEFAULT_ALPHA, seed=0, fanout=DEFAULT_FANOUT):
        self.alpha = alpha
        self.rng = random.Random(seed)
        self.top = LevelLinkedTree(fanout)
        self.head = None
        self.bucket_count = 0
        self.n = 0
        self.n_max = 0
        self.cadence_counter = 0
        self.rounds = 0
        self.meter = WorkMeter()
        self.action_log = []
        self.last_probes = 0
        self.last_tree_probes = 0
        self.overdue_rounds = 0
        self._window = []
        self._critical = set()
        self._schedule = None
        self._jobs = deque()
        self._busy = set()

    @classmethod
    def from_sorted(cls, keys, alpha=DEFAULT_ALPHA, seed=0, fanout=DEFAULT_FANOUT):
        """
        Bulk-build with keys spread evenly over round(n / target) buckets.

        Raises:
            NotSorted: If keys are not strictly increasing.
        """
        keys = list(keys)
        check_sorted(keys)
        built = cls(alpha, seed, fanout)
        n = len(keys)
        if not n:
            return built
        if keys[0] < 0 or keys[-1] >= KEY_LIMIT:
            raise ValueError("Keys must be unsigned 64-bit integers")
        built.n = built.n_max = n
        count = max(1, round(n / r_bucket_target(n)))
        previous = None
        for i in range(count):
            bucket = RBucket(keys[i * n // count:(i + 1) * n // count])
            separator = 0 if previous is None else bucket.elements[0]
            if previous is None:
                bucket.leaf = built.top.insert_front(separator, bucket)
                built.head = bucket
            else:
                bucket.leaf = built.top.insert_after(previous.leaf, separator, bucket)
                previous.next = bucket
                bucket.prev = previous
            previous = bucket
        built.bucket_count = count
        built._refresh_schedule()
        return built

    def __len__(self):
        return self.n

    @property
    def target(self):
        return r_bucket_target(max(self.n_max, 1))

    @property
    def cadence(self):
        """Updates between maintenance rounds, alpha * ceil(log2 log2 n_max)."""
        return self.alpha * loglog(max(self.n_max, 1))

    def buckets(self):
        bucket = self.head
        while bucket is not None:
            yield bucket
            bucket = bucket.next

    def keys(self):
        return [key for bucket in self.buckets() for key in bucket.elements]

    def max_key(self):
        """Largest stored key, None when empty."""
        leaf = self.top.last_leaf()
        while leaf is not None and not leaf.bucket.elements:
            leaf = leaf.left
        return leaf.bucket.elements[-1] if leaf is not None else None

    # --- fingers ---

    def resolve(self, finger):
        """
        Current bucket holding the finger's key.

        Follows fuse redirections, then walks bucket links past splits and
        transfers.

        Raises:
            StaleFinger: If the key is no longer stored.
        """
        bucket = finger.bucket
        while bucket.merged_into is not None:
            bucket = bucket.merged_into
        key = finger.key
        if bucket.epoch != finger.epoch:
            while bucket.next is not None and bucket.next.representative <= key:
                bucket = bucket.next
            while bucket.prev is not None and key < bucket.representative:
                bucket = bucket.prev
        i = bisect_left(bucket.elements, key)
        if i == len(bucket.elements) or bucket.elements[i] != key:
            raise StaleFinger(f"Finger key {key} is no longer stored")
        return bucket

    def _finger(self, key, bucket):
        return RFinger(key, bucket, bucket.epoch)

    def finger_of(self, key):
        """
        Finger for a stored key, found from the top-tree root.

        Raises:
            KeyAbsent: If key is not stored.
        """
        leaf = self.top.predecessor(key)
        if leaf is not None:
            elements = leaf.bucket.elements
            i = bisect_left(elements, key)
            if i < len(elements) and elements[i] == key:
                return self._finger(key, leaf.bucket)
        raise KeyAbsent(f"Key {key} is not stored")

    def _successor(self, bucket, key):
        i = bisect_left(bucket.elements, key + 1)
        if i < len(bucket.elements):
            return bucket.elements[i]
        bucket = bucket.next
        while bucket is not None and not bucket.elements:
            bucket = bucket.next
        return bucket.elements[0] if bucket is not None else None

    # --- updates ---

    def insert_at(self, finger, key):
        """
        Insert key directly after the finger's key; finger None inserts below the minimum.

        Args:
            finger (RFinger or None): Finger on the predecessor of key.
            key (int): Unsigned 64-bit key.

        Returns:
            RFinger: Finger on the new key.

        Raises:
            DuplicateKey: If key is already stored.
            KeyOutOfFingerRange: If key does not fit between the finger and its successor.
            StaleFinger: If finger is no longer valid.
        """
        if not 0 <= key < KEY_LIMIT:
            raise KeyOutOfFingerRange(f"Key {key} is outside the unsigned 64-bit universe")
        if finger is None:
            if self.head is None:
                self.head = RBucket()
                self.head.leaf = self.top.insert_front(0, self.head)
                self.bucket_count = 1
            smallest = self._successor(self.head, -1)
            if smallest is not None and key >= smallest:
                if key == smallest:
                    raise DuplicateKey(f"Key {key} is already stored")
                raise KeyOutOfFingerRange(f"Key {key} is not below the minimum {smallest}")
            bucket = self.head
        else:
            bucket = self.resolve(finger)
            if key == finger.key:
                raise DuplicateKey(f"Key {key} is already stored")
            successor = self._successor(bucket, finger.key)
            if key == successor:
                raise DuplicateKey(f"Key {key} is already stored")
            if key < finger.key or (successor is not None and key > successor):
                raise KeyOutOfFingerRange(f"Key {key} does not fit after {finger.key} (successor {successor})")
            while bucket.next is not None and bucket.next.representative <= key:
                bucket = bucket.next
        self.meter.begin_update()
        insort(bucket.elements, key)
        self.n += 1
        if self.n > self.n_max:
            self.n_max = self.n
        self._after_update(bucket)
        self.meter.end_update()
        while bucket.merged_into is not None:
            bucket = bucket.merged_into
        return self._locate_after_update(key, bucket)

    def _locate_after_update(self, key, bucket):
        while bucket.next is not None and bucket.next.representative <= key:
            bucket = bucket.next
        while bucket.prev is not None and key < bucket.representative:
            bucket = bucket.prev
        return self._finger(key, bucket)

    def delete_at(self, finger):
        """
        Delete the finger's key.

        Returns:
            int: The deleted key.

        Raises:
            StaleFinger: If finger is no longer valid.
        """
        if not self.n:
            raise EmptyStructure("Cannot delete from an empty dictionary")
        bucket = self.resolve(finger)
        self.meter.begin_update()
        del bucket.elements[bisect_left(bucket.elements, finger.key)]
        self.n -= 1
        self._after_update(bucket)
        self.meter.end_update()
        return finger.key

    def _after_update(self, bucket):
        self.meter.charge('bucket')
        bucket.delta += 1
        self._window.append(bucket)
        self._refresh_schedule()
        self._track(bucket)
        self.cadence_counter += 1
        if self.cadence_counter >= self.cadence:
            self.cadence_counter = 0
            self.maintenance_round()
        if self._jobs:
            self.pump(self.slice_units)

    # --- criticality tracking ---

    def _refresh_schedule(self):
        schedule = (self.target, self.cadence)
        if schedule == self._schedule:
            return
        self._schedule = schedule
        self._critical.clear()
        for bucket in self.buckets():
            self._track(bucket)

    def _is_critical(self, size):
        target = self.target
        return _below(size, target) or _above(size, target)

    def _track(self, bucket):
        if bucket.merged_into is None and self._is_critical(len(bucket)):
            self._critical.add(bucket)
        else:
            self._critical.discard(bucket)

    def criticality_of(self, bucket):
        return criticality(len(bucket), max(self.n_max, 1), self.alpha)

    def most_critical(self):
        """
        Bucket of maximum criticality, lowest separator on ties; None if none is critical.

        Buckets with a queued or running rebalance are skipped.
        """
        candidates = [b for b in self._critical if b not in self._busy]
        if not candidates:
            return None
        if self.bucket_count == 1 and not _above(len(self.head), self.target):
            return None
        return max(candidates, key=lambda b: (self.criticality_of(b), -b.representative))

    # --- maintenance ---

    @property
    def slice_units(self):
        """Rebalance steps run per update, ceil(4 * target / cadence) + 2."""
        return -(-4 * self.target // self.cadence) + 2

    @property
    def pending_rebalances(self):
        return len(self._jobs)

    def maintenance_round(self):
        """
        Run one maintenance round: a delta-proportional random check, then
        the most critical bucket.

        Rebalances chosen here are queued, not run. Each following update runs
        ``slice_units`` of their steps. Work still queued when the next round
        starts is finished first and counted in ``overdue_rounds``.

        Returns:
            MaintenanceReport: Planned actions, as (check, separator, action) tuples.
        """
        if self._jobs:
            self.overdue_rounds += 1
            logger.debug("Finishing %d rebalances left over from round %d", len(self._jobs), self.rounds)
            self.drain()
        self.rounds += 1
        report = MaintenanceReport(self.rounds)
        window = self._window
        self._window = []
        if window:
            chosen = window[self.rng.randrange(len(window))]
            for bucket in window:
                bucket.delta = 0
            while chosen.merged_into is not None:
                chosen = chosen.merged_into
            if self._needs_rebalance(chosen):
                report.actions.append(('random', chosen.representative, self._schedule_rebalance(chosen)))
        chosen = self.most_critical()
        if chosen is not None:
            report.actions.append(('max', chosen.representative, self._schedule_rebalance(chosen)))
        if report.actions:
            logger.debug("Maintenance round %d: %s", report.round, report.actions)
        self.action_log.append(report)
        return report

    def _needs_rebalance(self, bucket):
        if bucket.merged_into is not None or not self._is_critical(len(bucket)):
            return False
        return self.bucket_count > 1 or _above(len(bucket), self.target)

    def _schedule_rebalance(self, bucket):
        self._jobs.append(_RebalanceJob(bucket))
        self._busy.add(bucket)
        if _above(len(bucket), self.target):
            return 'split'
        return 'transfer' if self._transfer_partner(bucket) is not None else 'fuse'

    def pump(self, budget):
        """
        Run up to ``budget`` steps of queued rebalances.

        Every step moves at most one element across a bucket boundary or
        links or unlinks one top-tree leaf, and leaves the dictionary
        searchable and valid.

        Returns:
            int: Steps actually performed.
        """
        units = 0
        queue = self._jobs
        while queue and units < budget:
            job = queue[0]
            if job.steps is None:
                job.steps = self._rebalance_steps(job.bucket)
            try:
                next(job.steps)
                units += 1
            except StopIteration:
                queue.popleft()
        if not queue:
            self._busy.clear()
        return units

    def drain(self):
        """Finish all queued rebalances."""
        while self._jobs:
            self.pump(self.slice_units)

    def rebalance(self, bucket):
        """
        Rebalance a critical bucket until every bucket it produced is noncritical.

        Over-full buckets split into ceil/floor halves. Under-full buckets take
        elements from a neighbor when both equalized halves end up
        noncritical, and fuse with the smaller neighbor otherwise. Queued
        rebalances are finished first.

        Returns:
            str: The first action taken: 'split', 'transfer', 'fuse' or 'none'.

        Raises:
            InvariantViolation: If a produced bucket is still critical.
        """
        self.drain()
        steps = self._rebalance_steps(bucket)
        while True:
            try:
                next(steps)
            except StopIteration as done:
                self._busy.clear()
                return done.value

    def _rebalance_steps(self, bucket):
        first_action = None
        produced = []
        work = [bucket]
        for _ in range(MAX_REBALANCE_PASSES):
            while work:
                current = work.pop()
                if current.merged_into is not None:
                    continue
                if current not in produced:
                    produced.append(current)
                self._busy.add(current)
                if not self._needs_rebalance(current):
                    continue
                if _above(len(current), self.target):
                    action = 'split'
                    right = yield from self._split_steps(current)
                    work.extend([current, right])
                else:
                    partner = self._transfer_partner(current)
                    if partner is not None:
                        action = 'transfer'
                        self._busy.add(partner)
                        yield from self._transfer_steps(current, partner)
                        if partner not in produced:
                            produced.append(partner)
                    else:
                        action = 'fuse'
                        work.append((yield from self._fuse_steps(current)))
                if first_action is None:
                    first_action = action
            # Concurrent updates may have pushed a finished bucket out again
            work = [item for item in produced if self._needs_rebalance(item)]
            if not work:
                break
        for item in produced:
            self._track(item)
        if work:
            raise InvariantViolation(f"Bucket of size {len(work[0])} still critical after rebalance")
        return first_action or 'none'

    def _charge_step(self, top_before):
        self.meter.charge('move')
        self.meter.charge('maintenance', self.top.work_units - top_before)

    def _transfer_partner(self, bucket):
        target = self.target
        best = None
        for neighbor in (bucket.prev, bucket.next):
            if neighbor is None or len(neighbor) < target:
                continue
            total = len(bucket) + len(neighbor)
            if _above((total + 1) // 2, target) or _below(total // 2, target):
                continue
            if best is None or len(neighbor) > len(best):
                best = neighbor
        return best

    def _split_steps(self, bucket):
        before = self.top.work_units
        key = bucket.elements.pop()
        right = RBucket([key])
        right.leaf = self.top.insert_after(bucket.leaf, key, right)
        right.prev = bucket
        right.next = bucket.next
        if bucket.next is not None:
            bucket.next.prev = right
        bucket.next = right
        bucket.epoch += 1
        self.bucket_count += 1
        self._busy.add(right)
        self._charge_step(before)
        yield
        # bucket keeps the ceiling half
        while len(bucket) - len(right) >= 2:
            before = self.top.work_units
            key = bucket.elements.pop()
            right.elements.insert(0, key)
            self.top.update_key(right.leaf, key)
            bucket.epoch += 1
            right.epoch += 1
            self._charge_step(before)
            yield
        return right

    def _transfer_steps(self, bucket, neighbor):
        while len(neighbor) >= 2 and len(neighbor) > (len(bucket) + len(neighbor)) // 2:
            before = self.top.work_units
            if neighbor is bucket.next:
                bucket.elements.append(neighbor.elements.pop(0))
                self.top.update_key(neighbor.leaf, neighbor.elements[0])
            else:
                key = neighbor.elements.pop()
                bucket.elements.insert(0, key)
                self.top.update_key(bucket.leaf, key)
            bucket.epoch += 1
            neighbor.epoch += 1
            self._charge_step(before)
            yield

    def _fuse_steps(self, bucket):
        prev, nxt = bucket.prev, bucket.next
        if prev is not None and (nxt is None or len(prev) <= len(nxt)):
            left, right = prev, bucket
        else:
            left, right = bucket, nxt
        self._busy.update((left, right))
        while len(right) > 1:
            before = self.top.work_units
            left.elements.append(right.elements.pop(0))
            self.top.update_key(right.leaf, right.elements[0])
            left.epoch += 1
            right.epoch += 1
            self._charge_step(before)
            yield
        before = self.top.work_units
        left.elements.extend(right.elements)
        right.elements = []
        self.top.delete(right.leaf)
        right.merged_into = left
        left.next = right.next
        if right.next is not None:
            right.next.prev = left
        left.epoch += 1
        self._critical.discard(right)
        self.bucket_count -= 1
        self._charge_step(before)
        yield
        return left

    # --- search ---

    def finger_search(self, p, k):
        """
        Finger search from p for key k.

        Args:
            p (RFinger): Starting finger.
            k (int): Key to find.

        Returns:
            RFinger: Finger on k.

        Raises:
            KeyAbsent: If k is not stored.
            StaleFinger: If p is no longer valid.
        """
        bucket = self.resolve(p)
        probes = 2
        tree_probes = 0
        if not (bucket.representative <= k and (bucket.next is None or k < bucket.next.representative)):
            leaf = self.top.finger_predecessor(bucket.leaf, k)
            tree_probes = self.top.last_probes
            if leaf is None:
                self.last_probes, self.last_tree_probes = probes + tree_probes, tree_probes
                raise KeyAbsent(f"Key {k} is not stored")
            bucket = leaf.bucket
        index, used = counted_predecessor(bucket.elements, k)
        self.last_probes = probes + tree_probes + used
        self.last_tree_probes = tree_probes
        if index < 0 or bucket.elements[index] != k:
            raise KeyAbsent(f"Key {k} is not stored")
        return self._finger(k, bucket)

    # --- accounting and checks ---

    def space_cells(self):
        return self.n + self.bucket_count + self.top.space_cells()

    def fullness_violations(self):
        """
        Buckets outside [0.5, 2] * target; empty for a single-bucket dictionary.

        Buckets with a queued or running rebalance are skipped.
        """
        if self.bucket_count <= 1:
            return []
        target = self.target
        return [b for b in self.buckets()
                if b not in self._busy and (2 * len(b) < target or len(b) > 2 * target)]

    def validate(self):
        """
        Check key order, separators, bucket links and the top tree.

        Returns:
            ValidationResult: ok, or the first violated invariant.
        """
        keys = self.keys()
        if len(keys) != self.n:
            return ValidationResult(False, "key count matches bucket contents")
        if any(keys[i - 1] >= keys[i] for i in range(1, len(keys))):
            return ValidationResult(False, "concatenated bucket elements are sorted")
        buckets = list(self.buckets())
        if len(buckets) != self.bucket_count:
            return ValidationResult(False, "bucket count matches bucket list")
        if buckets and buckets[0].representative != 0:
            return ValidationResult(False, "first separator is 0")
        leaves = list(self.top.leaves())
        if [leaf.bucket for leaf in leaves] != buckets:
            return ValidationResult(False, "top-tree leaves follow bucket order")
        for bucket in buckets:
            if bucket.elements and bucket.elements[0] < bucket.representative:
                return ValidationResult(False, "separator at most the bucket's first element")
            if bucket.next is not None:
                if bucket.next.prev is not bucket:
                    return ValidationResult(False, "bucket links are symmetric")
                if bucket.elements and bucket.elements[-1] >= bucket.next.representative:
                    return ValidationResult(False, "bucket elements below the next separator")
        return self.top.validate()


def insert_at(rdict, finger, key):
    return rdict.insert_at(finger, key)


def delete_at(rdict, finger):
    return rdict.delete_at(finger)


def maintenance_round(rdict):
    return rdict.maintenance_round()


def rebalance(rdict, bucket):
    return rdict.rebalance(bucket)


def finger_search(rdict, p, k):
    return rdict.finger_search(p, k)
