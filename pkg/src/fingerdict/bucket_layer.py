"""
Two-level tail dictionary: buckets of size Theta(loglog n) whose first
elements are stored as representatives in a nested forest.

Insertions and deletions happen at the maximum only. Every bucket except
the last holds exactly ``capacity`` elements, so a rank maps to its bucket
by division. Representative insertions and removals are queued and run a
bounded number of steps per update; buckets whose representative is not yet
in the forest form a suffix that searches reach by direct access. When n
leaves the window [n0/2, 2*n0] and the capacity schedule changes, a shadow
dictionary is built incrementally and swapped in once it catches up.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass

from .exceptions import EmptyStructure, KeyAbsent, KeyNotGreaterThanMax, StaleFinger
from .nested_bdt import NestedForest, ValidationResult, validate as validate_forest
from .predecessor_index import DEFAULT_STEPS_PER_UPDATE, check_sorted, counted_predecessor
from .statistics import WorkMeter

logger = logging.getLogger(__name__)

REBUILD_OPS_PER_UPDATE = 4


def bucket_capacity(n):
    """
    Bucket size schedule max(4, ceil(log2 log2 max(n, 4))).

    Args:
        n (int): Element count, n >= 1.

    Returns:
        int: Elements per full bucket.
    """
    if n < 1:
        raise ValueError(f"Element count must be positive, got {n}")
    return max(4, math.ceil(math.log2(math.log2(max(n, 4)))))


@dataclass(frozen=True)
class TailHandle:
    """Finger into a TailFingerDict: 0-based rank plus key."""
    rank: int
    key: int


class TailBucket:
    """Contiguous sorted run of elements; its first element is the representative."""

    __slots__ = ('index', 'elements', 'representative', 'prev', 'next')

    def __init__(self, index, elements=None):
        self.index = index
        self.elements = elements if elements is not None else []
        self.representative = None
        self.prev = None
        self.next = None

    def __len__(self):
        return len(self.elements)

    @property
    def first(self):
        return self.elements[0]


class _RepJob:
    """Queued representative append or tail removal on the forest."""

    __slots__ = ('kind', 'bucket', 'key', 'steps')

    def __init__(self, kind, bucket, key=None):
        self.kind = kind
        self.bucket = bucket
        self.key = key
        self.steps = None


class TailFingerDict:
    """
    Finger-search dictionary with tail insertions and deletions.

    Args:
        steps_per_update (int): Spread-queue steps per update, per capacity unit.
        capacity_fn (callable): Bucket size schedule, ``bucket_capacity`` by default.
        rebuilding (bool): Whether this instance runs global rebuilds itself.
    """

    def __init__(self, steps_per_update=DEFAULT_STEPS_PER_UPDATE, capacity_fn=bucket_capacity,
                 rebuilding=True, capacity=None):
        self.steps_per_update = steps_per_update
        self.capacity_fn = capacity_fn
        self.capacity = capacity if capacity is not None else capacity_fn(1)
        self.rebuilding = rebuilding
        self.buckets = []
        self.forest = NestedForest(steps_per_update)
        self.spread_queue = deque()
        self.represented = 0
        self.n = 0
        self.n0 = 0
        self.meter = WorkMeter()
        self.last_probes = 0
        self.last_forest_probes = 0
        self.global_rebuilds = 0
        self._shadow = None
        self._shadow_valid = 0

    @classmethod
    def from_sorted(cls, keys, steps_per_update=DEFAULT_STEPS_PER_UPDATE, capacity_fn=bucket_capacity):
        """
        Bulk-build a dictionary over strictly increasing keys.

        Raises:
            NotSorted: If keys are not strictly increasing.
        """
        keys = list(keys)
        check_sorted(keys)
        built = cls(steps_per_update, capacity_fn)
        n = len(keys)
        built.capacity = capacity_fn(max(n, 1))
        cap = built.capacity
        for start in range(0, n, cap):
            built._open_bucket(keys[start:start + cap])
        built.forest = NestedForest.from_sorted([bucket.first for bucket in built.buckets], steps_per_update)
        for bucket in built.buckets:
            bucket.representative = built.forest.handle_at(bucket.index)
        built.represented = len(built.buckets)
        built.n = n
        built.n0 = n
        return built

    def __len__(self):
        return self.n

    @property
    def spread_budget(self):
        return self.steps_per_update * self.capacity

    @property
    def rebuild_in_progress(self):
        return self._shadow is not None

    def keys(self):
        return [key for bucket in self.buckets for key in bucket.elements]

    def key_at(self, rank):
        return self.buckets[rank // self.capacity].elements[rank % self.capacity]

    def handle_at(self, rank):
        return TailHandle(rank, self.key_at(rank))

    def resolve(self, handle):
        """
        Check that a handle still refers to a stored element.

        Raises:
            StaleFinger: If the element at the handle's rank has changed.
        """
        if 0 <= handle.rank < self.n and self.key_at(handle.rank) == handle.key:
            return handle.rank
        raise StaleFinger(f"Finger at rank {handle.rank} with key {handle.key} is no longer stored")

    # --- updates ---

    def _open_bucket(self, elements=None):
        bucket = TailBucket(len(self.buckets), elements)
        if self.buckets:
            bucket.prev = self.buckets[-1]
            self.buckets[-1].next = bucket
        self.buckets.append(bucket)
        return bucket

    def insert_tail(self, key):
        """
        Append a key larger than every stored key.

        Args:
            key (int): The new maximum.

        Returns:
            TailHandle: Handle to the new element.

        Raises:
            KeyNotGreaterThanMax: If key does not exceed the current maximum.
        """
        if self.n and key <= self.buckets[-1].elements[-1]:
            raise KeyNotGreaterThanMax(f"Key {key} is not greater than current maximum {self.buckets[-1].elements[-1]}")
        self.meter.begin_update()
        if not self.buckets or len(self.buckets[-1]) >= self.capacity:
            bucket = self._open_bucket()
            self.spread_queue.append(_RepJob('append', bucket.index, key))
            self.meter.charge('bucket')
        self.buckets[-1].elements.append(key)
        self.n += 1
        self.meter.charge('bucket')
        self._after_update()
        self.meter.end_update()
        return TailHandle(self.n - 1, key)

    def delete_tail(self):
        """
        Remove and return the maximum key.

        Raises:
            EmptyStructure: If the dictionary is empty.
        """
        if not self.n:
            raise EmptyStructure("Cannot delete from an empty dictionary")
        self.meter.begin_update()
        last = self.buckets[-1]
        key = last.elements.pop()
        self.n -= 1
        self.meter.charge('bucket')
        if not last.elements:
            self._retire(last)
        self._shadow_valid = min(self._shadow_valid, self.n)
        self._after_update()
        self.meter.end_update()
        return key

    def _retire(self, bucket):
        self.buckets.pop()
        if self.buckets:
            self.buckets[-1].next = None
        bucket.representative = None
        queue = self.spread_queue
        if queue and queue[-1].kind == 'append' and queue[-1].bucket == bucket.index and queue[-1].steps is None:
            queue.pop()
            return
        if bucket.index < self.represented:
            self.represented = bucket.index
        queue.append(_RepJob('remove', bucket.index))

    def _after_update(self):
        self.pump(self.spread_budget)
        if self.rebuilding:
            self._check_rebuild_window()
            self.global_rebuild_step()

    def pump(self, budget):
        """
        Run up to ``budget`` unit steps of queued representative work.

        Returns:
            int: Units actually performed.
        """
        units = 0
        queue = self.spread_queue
        while queue and units < budget:
            job = queue[0]
            if job.steps is None:
                if job.kind == 'append':
                    job.steps = self.forest.append_steps(job.key)
                else:
                    self.represented = min(self.represented, self.forest.leaf_count - 1)
                    job.steps = self.forest.remove_steps()
            try:
                next(job.steps)
                units += 1
            except StopIteration as done:
                queue.popleft()
                if job.kind == 'append':
                    self._mark_represented(done.value)
        if units:
            self.meter.charge('spread', units)
        return units

    def _mark_represented(self, handle):
        position = handle.position
        if position < len(self.buckets) and self.buckets[position].first == handle.key:
            self.buckets[position].representative = handle
            if position == self.represented:
                self.represented = position + 1

    def drain(self):
        """Finish all queued representative work."""
        while self.spread_queue:
            self.pump(self.spread_budget)

    # --- global rebuilding ---

    def _check_rebuild_window(self):
        n = self.n
        if self.n0 and self.n0 / 2 <= n <= 2 * self.n0:
            return
        self.n0 = n
        target = self.capacity_fn(max(n, 1))
        if self._shadow is not None or target == self.capacity:
            return
        logger.info("Starting global rebuild: bucket capacity %d -> %d at n=%d", self.capacity, target, n)
        self._shadow = TailFingerDict(self.steps_per_update, self.capacity_fn, rebuilding=False, capacity=target)
        self._shadow_valid = 0

    def global_rebuild_step(self):
        """
        Advance an in-progress global rebuild by one bounded slice.

        The shadow first drops any suffix invalidated by deletions, then copies
        elements by rank, then drains its own queue; it replaces the live
        structure once it holds exactly the live keys. No-op when idle.
        """
        shadow = self._shadow
        if shadow is None:
            return
        before = shadow.meter.total
        for _ in range(REBUILD_OPS_PER_UPDATE):
            if shadow.n > self._shadow_valid:
                shadow.delete_tail()
            elif shadow.n < self.n:
                shadow.insert_tail(self.key_at(shadow.n))
                self._shadow_valid = shadow.n
            elif shadow.spread_queue:
                shadow.pump(shadow.spread_budget)
            else:
                self._swap_in(shadow)
                break
        self.meter.charge('rebuild', shadow.meter.total - before)

    def _swap_in(self, shadow):
        self.capacity = shadow.capacity
        self.buckets = shadow.buckets
        self.forest = shadow.forest
        self.spread_queue = shadow.spread_queue
        self.represented = shadow.represented
        self._shadow = None
        self._shadow_valid = 0
        self.global_rebuilds += 1
        logger.info("Global rebuild finished: bucket capacity %d over %d buckets", self.capacity, len(self.buckets))

    # --- search ---

    def _bucket_lookup(self, bucket, s):
        index, probes = counted_predecessor(bucket.elements, s)
        if index < 0 or bucket.elements[index] != s:
            return None, probes
        return bucket.index * self.capacity + index, probes

    def search_star(self, f, s):
        """
        Finger search from f for key s.

        Same-bucket targets and targets at or beyond the last represented
        bucket are resolved by direct access. Otherwise the forest is searched
        from the representative of f's bucket and the located bucket is
        scanned.

        Args:
            f (TailHandle): Starting finger.
            s (int): Key to find.

        Returns:
            TailHandle: Handle of s.

        Raises:
            KeyAbsent: If s is not stored.
            StaleFinger: If f is no longer valid.
        """
        rank = self.resolve(f)
        buckets = self.buckets
        home = buckets[rank // self.capacity]
        probes = 2
        forest_probes = 0
        if home.first <= s and (home.next is None or s < home.next.first):
            target = home
        elif self.represented == 0 or s >= buckets[self.represented - 1].first:
            start = max(0, self.represented - 1)
            firsts = [bucket.first for bucket in buckets[start:]]
            index, used = counted_predecessor(firsts, s)
            probes += used
            if index < 0:
                raise KeyAbsent(f"Key {s} is not stored")
            target = buckets[start + index]
        else:
            origin = min(home.index, self.represented - 1)
            found = self.forest.finger_predecessor(self.forest.handle_at(origin), s)
            forest_probes = self.forest.last_probes
            if found is None:
                self._record_probes(probes + forest_probes, forest_probes)
                raise KeyAbsent(f"Key {s} is not stored")
            target = buckets[found.position]
        found_rank, used = self._bucket_lookup(target, s)
        self._record_probes(probes + used + forest_probes, forest_probes)
        if found_rank is None:
            raise KeyAbsent(f"Key {s} is not stored")
        return TailHandle(found_rank, s)

    def _record_probes(self, probes, forest_probes):
        self.last_probes = probes
        self.last_forest_probes = forest_probes

    # --- accounting and checks ---

    def space_cells(self):
        """Bucket cells (elements plus one header per bucket) plus forest cells."""
        return self.n + len(self.buckets) + self.forest.space_cells()

    def validate(self):
        """
        Check bucket discipline and representative consistency.

        Returns:
            ValidationResult: ok, or the first violated invariant.
        """
        keys = self.keys()
        if len(keys) != self.n:
            return ValidationResult(False, "element count matches bucket contents")
        if any(keys[i - 1] >= keys[i] for i in range(1, len(keys))):
            return ValidationResult(False, "concatenation of bucket elements is sorted")
        for bucket in self.buckets[:-1]:
            if len(bucket) != self.capacity:
                return ValidationResult(False, "only the last bucket may be below capacity")
        if self.buckets and not self.buckets[-1].elements:
            return ValidationResult(False, "no empty buckets")
        for index in range(self.represented):
            if self.forest.leaf_at(index).key != self.buckets[index].first:
                return ValidationResult(False, "represented buckets match forest leaves")
        return validate_forest(self.forest)


def search_star(tail_dict, f, s):
    return tail_dict.search_star(f, s)


def global_rebuild_step(tail_dict):
    tail_dict.global_rebuild_step()
