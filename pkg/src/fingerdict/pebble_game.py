"""
Oblivious zeroing pebble game.

Each round the increaser adds exactly c pebbles across n piles, seeing only
the round number and its own past moves. The decreaser then zeroes a pile
drawn with probability proportional to the increaser's last deltas, and
zeroes a maximum pile (lowest index on ties). M is the largest pile ever
observed right after an increaser move.
"""
import asyncio
import heapq
import logging
import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List

from .config import ADVERSARIES
from .exceptions import BudgetMismatch

logger = logging.getLogger(__name__)


def default_budget(n):
    """c = ceil(log2 log2 max(n, 4))."""
    return math.ceil(math.log2(math.log2(max(n, 4))))


@dataclass(frozen=True)
class IncreaserMove:
    """Sparse deltas: pile index -> pebbles added, summing to the budget."""
    deltas: Dict[int, int]

    def total(self):
        return sum(self.deltas.values())


class GameState:
    """Pile vector with the running maximum M and a lazy max-heap over piles."""

    def __init__(self, n, piles=None):
        self.piles = list(piles) if piles is not None else [0] * n
        self.M = max(self.piles, default=0)
        self.round = 0
        self._heap = [(-value, i) for i, value in enumerate(self.piles) if value]
        heapq.heapify(self._heap)

    def add(self, pile, amount):
        value = self.piles[pile] + amount
        self.piles[pile] = value
        heapq.heappush(self._heap, (-value, pile))
        if value > self.M:
            self.M = value

    def zero(self, pile):
        self.piles[pile] = 0

    def max_pile(self):
        """Index of a maximum nonzero pile, lowest index on ties; None if all are zero."""
        heap = self._heap
        while heap:
            value, pile = heap[0]
            if self.piles[pile] == -value:
                return pile
            heapq.heappop(heap)
        return None

    def current_max(self):
        pile = self.max_pile()
        return 0 if pile is None else self.piles[pile]


def check_move(move, c):
    """
    Raises:
        BudgetMismatch: If the move does not add exactly c pebbles.
    """
    total = move.total()
    if total != c or any(amount < 0 for amount in move.deltas.values()):
        raise BudgetMismatch(f"Increaser move adds {total} pebbles, budget is {c}")


def apply_increaser(state, move, c):
    check_move(move, c)
    for pile, amount in move.deltas.items():
        if amount:
            state.add(pile, amount)


def d_move(state, last, c, rng, alternate=False):
    """
    Player D's move against the increaser's last move.

    Zeroes a pile drawn with probability delta_i / c, then a maximum pile.
    With ``alternate`` only one of the two steps runs, chosen by round parity.

    Args:
        state (GameState): Game state, updated in place.
        last (IncreaserMove): The increaser's move this round.
        c (int): Budget.
        rng (random.Random): Decreaser randomness.

    Returns:
        GameState: The updated state.

    Raises:
        BudgetMismatch: If last does not sum to c.
    """
    check_move(last, c)
    random_step = not alternate or state.round % 2 == 0
    max_step = not alternate or state.round % 2 == 1
    if random_step:
        draw = rng.randrange(c)
        for pile, amount in sorted(last.deltas.items()):
            if draw < amount:
                state.zero(pile)
                break
            draw -= amount
    if max_step:
        pile = state.max_pile()
        if pile is not None:
            state.zero(pile)
    state.round += 1
    return state


class Adversary:
    """Oblivious increaser: moves depend only on the round and its own history."""

    def __init__(self, kind, n, c, rng):
        if kind not in ADVERSARIES:
            raise ValueError(f"Unknown adversary '{kind}'")
        self.kind = kind
        self.n = n
        self.c = c
        self.rng = rng
        self.history = []
        self.totals = Counter()

    def move(self, round_number):
        c, n = self.c, self.n
        if self.kind == 'concentrate':
            deltas = {0: c}
        elif self.kind == 'round_robin':
            deltas = {round_number % n: c}
        elif self.kind == 'random_spread':
            deltas = dict(Counter(self.rng.randrange(n) for _ in range(c)))
        else:
            deltas = self._revisit(round_number)
        move = IncreaserMove(deltas)
        self.remember(move)
        return move

    def remember(self, move):
        self.history.append(move)
        self.totals.update(move.deltas)

    def _revisit(self, round_number):
        # Cycle c pebbles over the (at most 2c) piles it has added the most to
        ranked = sorted(self.totals.items(), key=lambda item: (-item[1], item[0]))
        focus = [pile for pile, _ in ranked[:2 * self.c]]
        if not focus:
            focus = self.rng.sample(range(self.n), min(self.n, 2 * self.c))
        return dict(Counter(focus[(round_number * self.c + j) % len(focus)] for j in range(self.c)))


def adversary(kind, round_number, own_history, rng, n, c):
    """
    Stateless form of the adversary strategies: replays own_history into a
    fresh Adversary, then moves.

    Args:
        kind (str): One of concentrate, round_robin, random_spread, revisit.
        round_number (int): 0-based round.
        own_history (list): The adversary's previous IncreaserMoves.
        rng (random.Random): Adversary randomness.
        n (int): Pile count.
        c (int): Budget.
    """
    player = Adversary(kind, n, c, rng)
    for past in own_history:
        player.remember(past)
    return player.move(round_number)


@dataclass
class GameResult:
    seed: int
    adversary: str
    n: int
    c: int
    rounds: int
    M: int
    maxima: List[int] = field(default_factory=list, repr=False)


def run_game(n, rounds, c, adversary_kind, seed, alternate=False, keep_maxima=True):
    """
    Play one game.

    Args:
        n (int): Pile count.
        rounds (int): Rounds to play.
        c (int): Budget per increaser move.
        adversary_kind (str): Adversary strategy name.
        seed (int): Root seed; the two players draw from independent streams.
        alternate (bool): Alternate D's two zeroing steps.

    Returns:
        GameResult: Final M and the per-round maximum after each increaser move.
    """
    if n < 1 or c < 1 or rounds < 0:
        raise ValueError("n and c must be positive and rounds nonnegative")
    state = GameState(n)
    increaser = Adversary(adversary_kind, n, c, random.Random((seed << 1) | 1))
    decreaser_rng = random.Random(seed << 1)
    maxima = []
    for r in range(rounds):
        move = increaser.move(r)
        apply_increaser(state, move, c)
        if keep_maxima:
            maxima.append(state.current_max())
        d_move(state, move, c, decreaser_rng, alternate)
    return GameResult(seed, adversary_kind, n, c, rounds, state.M, maxima)


def _play(args):
    n, rounds, c, kind, seed, alternate = args
    return run_game(n, rounds, c, kind, seed, alternate, keep_maxima=False)


async def run_trials(n, rounds, c, adversaries, seeds, alternate=False, executor=None):
    """
    Run independent games for every (adversary, seed) pair on an executor.

    Args:
        seeds (iterable): Seeds per adversary.
        executor (concurrent.futures.Executor or None): None uses the loop's default.

    Returns:
        list: GameResults ordered by adversary, then seed.
    """
    loop = asyncio.get_running_loop()
    jobs = [(n, rounds, c, kind, seed, alternate) for kind in adversaries for seed in seeds]
    logger.info("Running %d pebble games (n=%d, c=%d, rounds=%d)", len(jobs), n, c, rounds)
    futures = [loop.run_in_executor(executor, _play, job) for job in jobs]
    return list(await asyncio.gather(*futures))


def summarize(results):
    """
    Per-adversary maximum and 99th-percentile (nearest rank) of M.

    Returns:
        dict: adversary -> (games, max M, p99 M).
    """
    by_kind = {}
    for result in results:
        by_kind.setdefault(result.adversary, []).append(result.M)
    summary = {}
    for kind, values in by_kind.items():
        values.sort()
        p99 = values[max(0, math.ceil(0.99 * len(values)) - 1)]
        summary[kind] = (len(values), values[-1], p99)
    return summary
