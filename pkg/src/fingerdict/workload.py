"""
Seeded workloads and the lockstep runner.

A workload is an initial key set plus a list of operations. Operations are
run against a structure and an OracleDict side by side; every search is
measured (probes and wall time) and tagged with the oracle's rank distance.
Any disagreement aborts with DivergenceDetected carrying a reduced
reproduction prefix.
"""
import logging
import math
import random
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

from .bucket_layer import TailFingerDict, TailHandle
from .config import STRUCTURES
from .exceptions import DivergenceDetected, FingerDictError, InvalidSpec, KeyAbsent
from .nested_bdt import ValidationResult
from .oracle import OracleDict
from .randomized_dict import RandomizedFingerDict

logger = logging.getLogger(__name__)

KEY_GAP = 1 << 32
CONTENT_CHECK_INTERVAL = 1024


@dataclass(frozen=True)
class Op:
    """One operation: A (tail append), I (insert after finger), D (delete), S (search).

    ``finger`` is a key; None on an insert means below the minimum.
    """
    kind: str
    key: int
    finger: Optional[int] = None

    def format(self):
        if self.kind in ('A', 'D'):
            return f"{self.kind} {self.key}"
        finger = '-' if self.finger is None else str(self.finger)
        return f"{self.kind} {finger} {self.key}"

    @property
    def mutating(self):
        return self.kind != 'S'


@dataclass(frozen=True)
class WorkloadSpec:
    structure: str = 'nested-bdt'
    n: int = 4096
    mix: Tuple[float, float, float] = (0.2, 0.1, 0.7)
    distance: Tuple = ('uniform',)
    seed: int = 1
    ops: int = 10000

    def validate(self):
        """
        Raises:
            InvalidSpec: If any field is out of range.
        """
        if self.structure not in STRUCTURES:
            raise InvalidSpec(f"Unknown structure '{self.structure}'")
        if len(self.mix) != 3 or any(p < 0 for p in self.mix) or not math.isclose(sum(self.mix), 1.0, abs_tol=1e-9):
            raise InvalidSpec(f"Operation mix {list(self.mix)} must be three nonnegative proportions summing to 1")
        if self.n < 0 or self.ops < 0:
            raise InvalidSpec("n and ops must be nonnegative")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidSpec(f"Seed {self.seed} is not a 64-bit value")
        return self


class ProbeRow(NamedTuple):
    structure: str
    n: int
    d: int
    probes: int
    wall_nanos: int
    op_kind: str


@dataclass
class ProbeReport:
    rows: List[ProbeRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def mean_probes(self, d=None):
        """Mean probes over all rows, or over rows at rank distance d."""
        rows = [row for row in self.rows if d is None or row.d == d]
        return sum(row.probes for row in rows) / len(rows) if rows else 0.0


def parse_mix(text):
    """
    Parse "insert,delete,search" proportions.

    Raises:
        InvalidSpec: If the text is not three numbers.
    """
    try:
        parts = tuple(float(part) for part in text.split(','))
    except ValueError:
        raise InvalidSpec(f"Cannot parse operation mix '{text}'")
    if len(parts) != 3:
        raise InvalidSpec(f"Operation mix '{text}' needs three proportions")
    return parts


def parse_distance(text):
    """
    Parse uniform, geometric:<p> or fixed:<d>.

    Raises:
        InvalidSpec: If the distribution is unknown or its parameter out of range.
    """
    name, _, arg = text.partition(':')
    try:
        if name == 'uniform' and not arg:
            return ('uniform',)
        if name == 'geometric':
            p = float(arg)
            if 0 < p <= 1:
                return ('geometric', p)
        if name == 'fixed':
            d = int(arg)
            if d >= 0:
                return ('fixed', d)
    except ValueError:
        pass
    raise InvalidSpec(f"Unknown distance distribution '{text}'")


def spec_from_config(config):
    return WorkloadSpec(
        structure=config['structure'],
        n=config['n'],
        mix=parse_mix(config['mix']),
        distance=parse_distance(config['dist']),
        seed=config['seed'],
        ops=config['ops'],
    ).validate()


def _draw_distance(distance, rng, size, finger_index):
    if distance[0] == 'uniform':
        return abs(rng.randrange(size) - finger_index)
    if distance[0] == 'geometric':
        p = distance[1]
        if p >= 1:
            return 0
        return int(math.log(1.0 - rng.random()) / math.log(1.0 - p))
    return distance[1]


def _target_index(rng, size, finger_index, d):
    up, down = finger_index + d, finger_index - d
    if up < size and down >= 0:
        return up if rng.random() < 0.5 else down
    if up < size:
        return up
    if down >= 0:
        return down
    return size - 1 if size - 1 - finger_index >= finger_index else 0


def generate_workload(spec):
    """
    Deterministic initial keys and operations for a spec.

    Returns:
        tuple: (initial sorted keys, list of Op).

    Raises:
        InvalidSpec: If the spec is invalid.
    """
    spec.validate()
    rng = random.Random(spec.seed)
    initial = [i * KEY_GAP + rng.randrange(1, KEY_GAP) for i in range(spec.n)]
    live = OracleDict(initial)
    tail_only = spec.structure == 'nested-bdt'
    insert_p, delete_p, _ = spec.mix
    ops = []
    for _ in range(spec.ops):
        u = rng.random()
        size = len(live)
        if not size or u < insert_p:
            op = _draw_insert(rng, live, tail_only)
        elif u < insert_p + delete_p:
            key = live.keys[-1] if tail_only else live.keys[rng.randrange(size)]
            op = Op('D', key)
        else:
            finger_index = rng.randrange(size)
            d = _draw_distance(spec.distance, rng, size, finger_index)
            target = _target_index(rng, size, finger_index, d)
            op = Op('S', live.keys[target], live.keys[finger_index])
        if op.kind in ('A', 'I'):
            live.insert(op.key)
        elif op.kind == 'D':
            live.delete(op.key)
        ops.append(op)
    return initial, ops


def _draw_insert(rng, live, tail_only):
    keys = live.keys
    if not keys:
        return Op('A', rng.randrange(1, KEY_GAP)) if tail_only else Op('I', rng.randrange(1, KEY_GAP))
    if tail_only:
        return Op('A', keys[-1] + rng.randrange(1, KEY_GAP))
    index = rng.randrange(-1, len(keys))
    if index == -1:
        if keys[0] > 0:
            return Op('I', rng.randrange(keys[0]))
        index = 0
    low = keys[index]
    high = keys[index + 1] if index + 1 < len(keys) else low + KEY_GAP
    if high - low < 2:
        return Op('I', keys[-1] + rng.randrange(1, KEY_GAP), keys[-1])
    return Op('I', rng.randrange(low + 1, high), low)


def parse_ops(lines):
    """
    Parse the operation-file format: ``A <key>``, ``I <finger-key> <key>``,
    ``D <key>``, ``S <finger-key> <key>``; ``-`` as an insert finger means
    below the minimum. Blank lines and ``#`` comments are skipped.

    Raises:
        InvalidSpec: On a malformed line.
    """
    ops = []
    for number, line in enumerate(lines, 1):
        text = line.split('#', 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        kind = parts[0]
        try:
            if kind in ('A', 'D') and len(parts) == 2:
                ops.append(Op(kind, int(parts[1])))
                continue
            if kind in ('I', 'S') and len(parts) == 3:
                finger = None if parts[1] == '-' and kind == 'I' else int(parts[1])
                ops.append(Op(kind, int(parts[2]), finger))
                continue
        except ValueError:
            pass
        raise InvalidSpec(f"Malformed operation on line {number}: '{line.rstrip()}'")
    return ops


def format_ops(ops):
    return ''.join(op.format() + '\n' for op in ops)


class StructureAdapter:
    """Uniform face of a structure for the lockstep runner."""

    name = None

    def append(self, key):
        raise NotImplementedError

    def insert(self, finger, key):
        raise NotImplementedError

    def delete(self, key):
        raise NotImplementedError

    def search(self, finger, finger_rank, key):
        """Return (found key, probes)."""
        raise NotImplementedError

    def keys(self):
        raise NotImplementedError

    def validate(self):
        return ValidationResult(True)


class TailAdapter(StructureAdapter):
    name = 'nested-bdt'

    def __init__(self, keys, seed=0):
        self.structure = TailFingerDict.from_sorted(keys)

    def append(self, key):
        self.structure.insert_tail(key)

    def insert(self, finger, key):
        raise InvalidSpec("The nested-bdt structure supports tail appends only")

    def delete(self, key):
        if not self.structure.n or self.structure.key_at(self.structure.n - 1) != key:
            raise InvalidSpec(f"The nested-bdt structure deletes only its maximum, not {key}")
        self.structure.delete_tail()

    def search(self, finger, finger_rank, key):
        found = self.structure.search_star(TailHandle(finger_rank - 1, finger), key)
        return found.key, self.structure.last_probes

    def keys(self):
        return self.structure.keys()

    def validate(self):
        return self.structure.validate()


class RandomizedAdapter(StructureAdapter):
    name = 'randomized'

    def __init__(self, keys, seed=0):
        self.structure = RandomizedFingerDict.from_sorted(keys, seed=seed)

    def append(self, key):
        if self.structure.n:
            self.structure.insert_at(self.structure.finger_of(self.structure.max_key()), key)
        else:
            self.structure.insert_at(None, key)

    def insert(self, finger, key):
        handle = None if finger is None else self.structure.finger_of(finger)
        self.structure.insert_at(handle, key)

    def delete(self, key):
        self.structure.delete_at(self.structure.finger_of(key))

    def search(self, finger, finger_rank, key):
        found = self.structure.finger_search(self.structure.finger_of(finger), key)
        return found.key, self.structure.last_probes

    def keys(self):
        return self.structure.keys()

    def validate(self):
        return self.structure.validate()


class OracleAdapter(StructureAdapter):
    name = 'oracle'

    def __init__(self, keys, seed=0):
        self.structure = OracleDict(keys)

    def append(self, key):
        if self.structure.keys and key <= self.structure.keys[-1]:
            raise InvalidSpec(f"Append key {key} is not above the maximum")
        self.structure.insert(key)

    def insert(self, finger, key):
        self.structure.insert(key)

    def delete(self, key):
        self.structure.delete(key)

    def search(self, finger, finger_rank, key):
        rank, _ = self.structure.finger_search(finger_rank, key)
        return self.structure.key_at(rank), self.structure.last_probes

    def keys(self):
        return list(self.structure.keys)


ADAPTERS = {adapter.name: adapter for adapter in (TailAdapter, RandomizedAdapter, OracleAdapter)}


def _diverged(spec, initial, ops, index, message):
    # Initial keys become appends so the prefix replays on an empty structure
    prefix = [Op('A', key) for key in initial]
    prefix += [op for op in ops[:index] if op.mutating] + [ops[index]]
    logger.error("Divergence at operation %d (seed %d): %s", index, spec.seed, message)
    return DivergenceDetected(f"Operation {index} ({ops[index].format()}): {message}",
                              seed=spec.seed, op_index=index, prefix=prefix)


def run_workload(spec, initial=None, ops=None, structure_factory=None, collector=None, progress=None):
    """
    Run a workload against a structure with the oracle in lockstep.

    Args:
        spec (WorkloadSpec): Structure, seed and generation parameters.
        initial (list or None): Initial keys; generated from spec when None.
        ops (list or None): Operations; generated from spec when None.
        structure_factory (callable or None): ``factory(keys, seed) -> StructureAdapter``.
        collector (ProbeStatisticsCollector or None): Also receives every measurement.
        progress (callable or None): ``progress(done, total)`` callback.

    Returns:
        ProbeReport: One row per search.

    Raises:
        DivergenceDetected: If the structure disagrees with the oracle.
        InvalidSpec: If the spec or an operation is not supported by the structure.
    """
    spec.validate()
    if ops is None:
        initial, ops = generate_workload(spec)
    initial = list(initial or [])
    factory = structure_factory or ADAPTERS[spec.structure]
    adapter = factory(initial, spec.seed)
    oracle = OracleDict(initial)
    report = ProbeReport()
    total = len(ops)
    for index, op in enumerate(ops):
        _check_op(oracle, op)
        try:
            if op.kind == 'S':
                row = _measure_search(spec, initial, ops, index, adapter, oracle)
                if row is not None:
                    report.rows.append(row)
                    if collector is not None:
                        collector.track_search(row.structure, row.d, row.probes)
            elif op.kind in ('A', 'I'):
                oracle.insert(op.key)
                if op.kind == 'A':
                    adapter.append(op.key)
                else:
                    adapter.insert(op.finger, op.key)
            else:
                oracle.delete(op.key)
                adapter.delete(op.key)
        except (DivergenceDetected, InvalidSpec):
            raise
        except FingerDictError as error:
            raise _diverged(spec, initial, ops, index, f"{type(error).__name__}: {error}")
        if (index + 1) % CONTENT_CHECK_INTERVAL == 0 or index + 1 == total:
            if adapter.keys() != oracle.keys:
                raise _diverged(spec, initial, ops, index, "contents differ from the oracle")
        if progress is not None:
            progress(index + 1, total)
    return report


def _check_op(oracle, op):
    """Reject operations whose preconditions fail against the oracle's contents."""
    keys = oracle.keys
    if op.kind == 'A':
        if keys and op.key <= keys[-1]:
            raise InvalidSpec(f"Append key {op.key} is not above the maximum {keys[-1]}")
    elif op.kind == 'I':
        if op.key in oracle:
            raise InvalidSpec(f"Insert key {op.key} is already stored")
        if op.finger is None:
            if keys and op.key > keys[0]:
                raise InvalidSpec(f"Front insert key {op.key} is not below the minimum {keys[0]}")
        else:
            successor = oracle.successor_of(op.finger) if op.finger in oracle else None
            if op.finger not in oracle or op.key < op.finger or (successor is not None and op.key > successor):
                raise InvalidSpec(f"Insert key {op.key} does not fit after finger {op.finger}")
    elif op.kind == 'D':
        if op.key not in oracle:
            raise InvalidSpec(f"Delete key {op.key} is not stored")
    elif op.finger not in oracle:
        raise InvalidSpec(f"Search finger {op.finger} is not stored")


def _measure_search(spec, initial, ops, index, adapter, oracle):
    op = ops[index]
    finger_rank = oracle.rank_of(op.finger)
    if op.key not in oracle:
        try:
            adapter.search(op.finger, finger_rank, op.key)
        except KeyAbsent:
            return None
        raise _diverged(spec, initial, ops, index, "structure found a key the oracle does not store")
    expected_rank, d = oracle.finger_search(finger_rank, op.key)
    started = time.perf_counter_ns()
    found, probes = adapter.search(op.finger, finger_rank, op.key)
    elapsed = time.perf_counter_ns() - started
    if found != op.key:
        raise _diverged(spec, initial, ops, index, f"search returned {found}, oracle rank {expected_rank}")
    return ProbeRow(adapter.name, len(oracle), d, probes, elapsed, 'search')
