import os
import sys

import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

KEY_GAP = 1 << 32


@pytest.fixture
def spaced_keys():
    """Factory for n sorted keys spaced KEY_GAP apart, starting at KEY_GAP."""
    def make(n):
        return [(i + 1) * KEY_GAP for i in range(n)]
    return make


def pytest_sessionfinish(session, exitstatus):
    # No cleanup needed after test session
    pass
