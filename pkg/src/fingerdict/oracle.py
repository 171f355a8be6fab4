"""
Sorted-array reference dictionary.

Ground truth for differential runs and the comparison-model baseline for
probe measurements: finger search gallops away from the finger rank and
then binary-searches the bracketed block.
"""
from bisect import bisect_left

from .exceptions import DuplicateKey, KeyAbsent
from .predecessor_index import check_sorted


class OracleDict:
    """Strictly increasing key array with a comparison counter. Ranks are 1-based."""

    def __init__(self, keys=()):
        self.keys = list(keys)
        check_sorted(self.keys)
        self.probe_count = 0
        self.last_probes = 0

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key):
        i = bisect_left(self.keys, key)
        return i < len(self.keys) and self.keys[i] == key

    def rank_of(self, key):
        """
        1-based rank of a stored key by full binary search.

        Raises:
            KeyAbsent: If key is not stored.
        """
        i = bisect_left(self.keys, key)
        if i == len(self.keys) or self.keys[i] != key:
            raise KeyAbsent(f"Key {key} is not stored")
        return i + 1

    def key_at(self, rank):
        return self.keys[rank - 1]

    def successor_of(self, key):
        """Smallest stored key greater than key, or None."""
        i = bisect_left(self.keys, key + 1)
        return self.keys[i] if i < len(self.keys) else None

    def finger_search(self, finger_rank, s):
        """
        Galloping search for s starting at finger_rank.

        Args:
            finger_rank (int): 1-based rank of the finger.
            s (int): Key to find.

        Returns:
            tuple: (1-based rank of s, rank distance d).

        Raises:
            KeyAbsent: If s is not stored.
        """
        keys = self.keys
        m = len(keys)
        if not 1 <= finger_rank <= m:
            raise IndexError(f"Finger rank {finger_rank} outside 1..{m}")
        f = finger_rank - 1
        probes = 1
        if keys[f] == s:
            found = f
        else:
            probes += 1
            if keys[f] < s:
                bound = 1
                while True:
                    probe = f + bound
                    if probe >= m:
                        lo, hi = f + bound // 2 + 1, m
                        break
                    probes += 1
                    if keys[probe] >= s:
                        lo, hi = f + bound // 2 + 1, probe + 1
                        break
                    bound *= 2
            else:
                bound = 1
                while True:
                    probe = f - bound
                    if probe < 0:
                        lo, hi = 0, f - bound // 2
                        break
                    probes += 1
                    if keys[probe] <= s:
                        lo, hi = probe, f - bound // 2
                        break
                    bound *= 2
            while lo < hi:
                mid = (lo + hi) // 2
                probes += 1
                if keys[mid] < s:
                    lo = mid + 1
                else:
                    hi = mid
            found = lo
        self.last_probes = probes
        self.probe_count += probes
        if found >= m or keys[found] != s:
            raise KeyAbsent(f"Key {s} is not stored")
        return found + 1, abs(found - f)

    def insert(self, key):
        """
        Insert a key, returning its 1-based rank.

        Raises:
            DuplicateKey: If key is already stored.
        """
        i = bisect_left(self.keys, key)
        if i < len(self.keys) and self.keys[i] == key:
            raise DuplicateKey(f"Key {key} is already stored")
        self.keys.insert(i, key)
        return i + 1

    def delete(self, key):
        """
        Remove a stored key.

        Raises:
            KeyAbsent: If key is not stored.
        """
        i = bisect_left(self.keys, key)
        if i == len(self.keys) or self.keys[i] != key:
            raise KeyAbsent(f"Key {key} is not stored")
        del self.keys[i]


def oracle_finger_search(oracle, finger_rank, s):
    return oracle.finger_search(finger_rank, s)


def oracle_insert(oracle, key):
    return oracle.insert(key)


def oracle_delete(oracle, key):
    oracle.delete(key)
