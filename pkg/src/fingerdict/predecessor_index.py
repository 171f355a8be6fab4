"""
Predecessor indexes over small sorted key arrays.

Every internal node of the nested forest and of the top-level tree answers
predecessor queries over its routing keys through one of these indexes.
The layout is a flat sorted array plus a summary of block maxima; queries
binary-search the summary, then the block, and count each key comparison
as one probe. ``TailDynamicIndex`` adds tail appends whose block-size
rebuilds are spread over later appends, a bounded number of steps each.
"""
import logging

from .exceptions import EmptyStructure, KeyNotGreaterThanMax, NotSorted

logger = logging.getLogger(__name__)

DEFAULT_STEPS_PER_UPDATE = 8


def _block_size(m):
    return max(1, m.bit_length())


def _largest_at_most(keys, x, lo, hi):
    """Return (i, comparisons) for the largest keys[i] <= x in [lo, hi), i = lo - 1 if none."""
    probes = 0
    while lo < hi:
        mid = (lo + hi) // 2
        probes += 1
        if keys[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo - 1, probes


def _first_at_least(keys, x, lo, hi):
    """Return (i, comparisons) for the first keys[i] >= x in [lo, hi), i = hi if none."""
    probes = 0
    while lo < hi:
        mid = (lo + hi) // 2
        probes += 1
        if keys[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo, probes


def counted_predecessor(keys, x):
    """
    Plain counted binary search over a sorted list.

    Args:
        keys (list): Strictly increasing keys.
        x (int): Query key.

    Returns:
        tuple: (0-based index of the largest key <= x or -1, comparisons made).
    """
    return _largest_at_most(keys, x, 0, len(keys))


def check_sorted(keys):
    """Raise NotSorted unless keys are strictly increasing."""
    for i in range(1, len(keys)):
        if keys[i - 1] >= keys[i]:
            raise NotSorted(f"Keys not strictly increasing at position {i + 1}: {keys[i - 1]} >= {keys[i]}")


class SmallSetIndex:
    """Sorted key array with a block-maxima summary and a probe counter.

    Positions are 1-based, matching routing-array notation A[1..m].
    """

    def __init__(self, keys=(), block=None):
        self._keys = list(keys)
        self._block = block or _block_size(len(self._keys))
        self._summary = self._keys[self._block - 1::self._block]
        self.probe_count = 0

    def __len__(self):
        return len(self._keys)

    @property
    def keys(self):
        return tuple(self._keys)

    @property
    def first(self):
        return self._keys[0]

    @property
    def last(self):
        return self._keys[-1]

    def key_at(self, position):
        """Key at 1-based position."""
        return self._keys[position - 1]

    def _covered(self):
        return len(self._summary) * self._block

    def predecessor(self, x):
        """
        Find the largest stored key <= x.

        Args:
            x (int): Query key.

        Returns:
            tuple or None: (1-based position, key), or None if every key exceeds x.
        """
        keys = self._keys
        m = len(keys)
        if not m:
            return None
        block = self._block
        summary = self._summary
        covered = len(summary) * block
        probes = 0
        if covered < m:
            probes += 1
            if x >= keys[covered]:
                idx, p = _largest_at_most(keys, x, covered, m)
                self.probe_count += probes + p
                return idx + 1, keys[idx]
            if covered == 0:
                self.probe_count += probes
                return None
        blk, p = _first_at_least(summary, x, 0, len(summary))
        probes += p
        if blk == len(summary):
            idx = covered - 1
        else:
            lo = blk * block
            idx, p = _largest_at_most(keys, x, lo, lo + block)
            probes += p
        self.probe_count += probes
        if idx < 0:
            return None
        return idx + 1, keys[idx]


def build_static(keys):
    """
    Build a SmallSetIndex over strictly increasing keys.

    Args:
        keys (list): Strictly increasing keys.

    Returns:
        SmallSetIndex: The index.

    Raises:
        NotSorted: If keys are not strictly increasing.
    """
    keys = list(keys)
    check_sorted(keys)
    return SmallSetIndex(keys)


class _SummaryRebuild:
    """Block-maxima summary under construction for a larger block size."""

    __slots__ = ('block', 'entries')

    def __init__(self, block):
        self.block = block
        self.entries = []


class TailDynamicIndex:
    """SmallSetIndex that grows at the tail with O(1) worst-case work per append.

    When the array doubles, the summary is rebuilt for the larger block size.
    The rebuild runs at most ``steps_per_update - 1`` steps per append; the old
    summary stays authoritative until the new one covers every full block.
    """

    def __init__(self, keys=(), steps_per_update=DEFAULT_STEPS_PER_UPDATE):
        if steps_per_update < 2:
            raise ValueError("steps_per_update must be at least 2")
        self.base = build_static(keys)
        self.steps_per_update = steps_per_update
        self.pending_rebuild = None
        self.work_units = 0
        self.last_append_work = 0
        self.max_append_work = 0

    def __len__(self):
        return len(self.base)

    @property
    def keys(self):
        return self.base.keys

    @property
    def probe_count(self):
        return self.base.probe_count

    def key_at(self, position):
        return self.base.key_at(position)

    @property
    def first(self):
        return self.base.first

    @property
    def last(self):
        return self.base.last

    def predecessor(self, x):
        return self.base.predecessor(x)

    def append_tail(self, key):
        """
        Append a key larger than every stored key.

        Args:
            key (int): The new maximum.

        Raises:
            KeyNotGreaterThanMax: If key does not exceed the current maximum.
        """
        base = self.base
        keys = base._keys
        if keys and key <= keys[-1]:
            raise KeyNotGreaterThanMax(f"Key {key} is not greater than current maximum {keys[-1]}")
        keys.append(key)
        if len(keys) % base._block == 0:
            base._summary.append(key)
        work = 1
        if self.pending_rebuild is None and _block_size(len(keys)) > base._block:
            self.pending_rebuild = _SummaryRebuild(_block_size(len(keys)))
        if self.pending_rebuild is not None:
            work += self._advance_rebuild(self.steps_per_update - 1)
        self._record(work)

    def replace_tail(self, key):
        """
        Replace the maximum key, keeping strict order with its predecessor.

        Raises:
            EmptyStructure: If the index is empty.
            KeyNotGreaterThanMax: If key does not exceed the second largest key.
        """
        base = self.base
        keys = base._keys
        if not keys:
            raise EmptyStructure("Cannot replace the tail of an empty index")
        if len(keys) > 1 and key <= keys[-2]:
            raise KeyNotGreaterThanMax(f"Key {key} is not greater than {keys[-2]}")
        keys[-1] = key
        m = len(keys)
        if base._covered() == m:
            base._summary[-1] = key
        rebuild = self.pending_rebuild
        if rebuild is not None and len(rebuild.entries) * rebuild.block == m:
            rebuild.entries[-1] = key
        self._record(1)

    def pop_tail(self):
        """
        Remove and return the maximum key.

        Raises:
            EmptyStructure: If the index is empty.
        """
        base = self.base
        keys = base._keys
        if not keys:
            raise EmptyStructure("Cannot pop from an empty index")
        key = keys.pop()
        m = len(keys)
        if base._covered() > m:
            base._summary.pop()
        rebuild = self.pending_rebuild
        if rebuild is not None and len(rebuild.entries) * rebuild.block > m:
            rebuild.entries.pop()
        self._record(1)
        return key

    def _advance_rebuild(self, budget):
        rebuild = self.pending_rebuild
        keys = self.base._keys
        steps = 0
        while steps < budget:
            nxt = (len(rebuild.entries) + 1) * rebuild.block - 1
            if nxt >= len(keys):
                self.base._block = rebuild.block
                self.base._summary = rebuild.entries
                self.pending_rebuild = None
                logger.debug("Summary rebuilt with block size %d over %d keys", rebuild.block, len(keys))
                break
            rebuild.entries.append(keys[nxt])
            steps += 1
        return steps

    def _record(self, work):
        self.work_units += work
        self.last_append_work = work
        if work > self.max_append_work:
            self.max_append_work = work
