import pytest
import sys
import os
import random

# Add the parent directory to the path so we can import from src
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))
from src.fingerdict.oracle import OracleDict, oracle_delete, oracle_finger_search, oracle_insert
from src.fingerdict.exceptions import DuplicateKey, KeyAbsent, NotSorted


class TestOracleDict:
    """Test the sorted-array reference dictionary."""

    def test_unsorted_keys_rejected(self):
        with pytest.raises(NotSorted):
            OracleDict([3, 1, 2])

    def test_ranks_are_one_based(self):
        oracle = OracleDict([10, 20, 30])
        assert oracle.rank_of(10) == 1
        assert oracle.key_at(3) == 30
        assert 20 in oracle
        assert 25 not in oracle

    def test_successor(self):
        oracle = OracleDict([10, 20, 30])
        assert oracle.successor_of(10) == 20
        assert oracle.successor_of(15) == 20
        assert oracle.successor_of(30) is None

    def test_insert_and_delete(self):
        """
        Given an oracle over [10, 30]
        When 20 is inserted and 10 deleted
        Then the keys should be [20, 30] and duplicates or absent keys rejected
        """
        oracle = OracleDict([10, 30])
        assert oracle_insert(oracle, 20) == 2
        oracle_delete(oracle, 10)
        assert oracle.keys == [20, 30]
        with pytest.raises(DuplicateKey):
            oracle.insert(20)
        with pytest.raises(KeyAbsent):
            oracle.delete(10)


class TestOracleFingerSearch:
    """Test galloping finger search on the oracle."""

    def test_distance_reported(self):
        oracle = OracleDict(list(range(0, 100, 5)))
        assert oracle_finger_search(oracle, 3, 50) == (11, 8)
        assert oracle.finger_search(11, 10) == (3, 8)

    def test_zero_distance(self):
        oracle = OracleDict([1, 2, 3])
        assert oracle.finger_search(2, 2) == (2, 0)
        assert oracle.last_probes == 1

    def test_absent_key(self):
        oracle = OracleDict([10, 20, 30])
        with pytest.raises(KeyAbsent):
            oracle.finger_search(1, 25)
        with pytest.raises(KeyAbsent):
            oracle.finger_search(3, 5)
        with pytest.raises(KeyAbsent):
            oracle.finger_search(1, 99)

    def test_matches_binary_search(self):
        """
        Given 1000 spaced keys
        When random fingers search for random stored keys
        Then ranks should match the binary-search rank and probes stay logarithmic in d
        """
        keys = [3 * i for i in range(1000)]
        oracle = OracleDict(keys)
        rng = random.Random(2)
        for _ in range(500):
            f = rng.randrange(1, 1001)
            t = rng.randrange(1000)
            rank, d = oracle.finger_search(f, keys[t])
            assert rank == t + 1
            assert d == abs(t + 1 - f)
            assert oracle.last_probes <= 4 + 2 * (d + 1).bit_length()
