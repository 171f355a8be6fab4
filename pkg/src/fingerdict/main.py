# -*- coding: utf-8 -*-
import asyncio
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor

try:
    # Try relative import first
    from .config import ADVERSARIES, build_parser, load_config
    from .exceptions import DivergenceDetected, FingerDictError, InvalidSpec, IoFailure
    from .nested_bdt import NestedForest, validate
    from .pebble_game import default_budget, run_trials, summarize
    from .statistics import ProbeStatisticsCollector, StatisticsPersistence
    from .statistics_reporting import StatisticsReporter, emit_csv, emit_pebble_csv
    from .workload import KEY_GAP, format_ops, parse_ops, run_workload, spec_from_config
except ImportError:
    # Fall back to absolute import (when installed as package)
    from fingerdict.config import ADVERSARIES, build_parser, load_config
    from fingerdict.exceptions import DivergenceDetected, FingerDictError, InvalidSpec, IoFailure
    from fingerdict.nested_bdt import NestedForest, validate
    from fingerdict.pebble_game import default_budget, run_trials, summarize
    from fingerdict.statistics import ProbeStatisticsCollector, StatisticsPersistence
    from fingerdict.statistics_reporting import StatisticsReporter, emit_csv, emit_pebble_csv
    from fingerdict.workload import KEY_GAP, format_ops, parse_ops, run_workload, spec_from_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIVERGENCE = 1
EXIT_INVALID = 2


def report_progress(current, total):
    """
    Report progress during a workload run.

    Args:
        current (int): Current position in the process
        total (int): Total number of items to process
    """
    percent = int(current / total * 100) if total > 0 else 0
    print(f"Progress: {current}/{total} ({percent}%)")


def _progress_every(total):
    step = max(1, total // 10)

    def progress(current, total_ops):
        if current % step == 0 or current == total_ops:
            report_progress(current, total_ops)
    return progress


def read_ops_file(path):
    """
    Read a replay file of operations.

    Raises:
        IoFailure: If the file cannot be read.
        InvalidSpec: If a line is malformed.
    """
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            lines = handle.readlines()
    except OSError as e:
        raise IoFailure(f"Cannot read ops file '{path}': {e}")
    return parse_ops(lines)


def write_ops_file(path, ops):
    """
    Write operations in the replay format.

    Raises:
        IoFailure: If the file cannot be written.
    """
    try:
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(format_ops(ops))
    except OSError as e:
        raise IoFailure(f"Cannot write ops file '{path}': {e}")


def report_divergence(error, prefix_out=None):
    """
    Print a divergence with its full reproducing prefix.

    The prefix starts with the initial keys as appends, so ``diff --ops-file``
    replays it on an empty structure. With ``prefix_out`` it goes to that file
    instead of stdout.
    """
    print(f"Error: Divergence from the oracle - {error}")
    print(f"Seed {error.seed}, operation {error.op_index}; "
          f"reproducing prefix of {len(error.prefix)} operations:")
    if prefix_out:
        try:
            write_ops_file(prefix_out, error.prefix)
            print(f"Reproducing prefix written to {prefix_out}")
            return
        except IoFailure as e:
            print(f"Error: {e}")
    print(format_ops(error.prefix), end='')


def run_bench(config):
    """
    Run a generated or replayed workload with the oracle in lockstep.

    Returns:
        ProbeStatisticsCollector: Per-structure probe measurements.
    """
    spec = spec_from_config(config)
    ops = initial = None
    if config.get('ops_file'):
        ops = read_ops_file(config['ops_file'])
        initial = []
        print(f"Replaying {len(ops)} operations from {config['ops_file']} on {spec.structure}")
    else:
        print(f"Running {spec.ops} operations on {spec.structure} (n={spec.n}, seed={spec.seed})")

    collector = ProbeStatisticsCollector()
    started = time.time()
    total = len(ops) if ops is not None else spec.ops
    report = run_workload(spec, initial=initial, ops=ops, collector=collector,
                          progress=_progress_every(total))
    duration = time.time() - started

    if config.get('csv'):
        emit_csv(report, config['csv'])
        print(f"Probe report written to {config['csv']} ({len(report)} rows)")
    if config.get('json'):
        try:
            StatisticsPersistence().save_to_file(collector, config['json'])
        except OSError as e:
            raise IoFailure(f"Cannot write JSON file '{config['json']}': {e}")
        print(f"Distance bands saved to {config['json']}")

    reporter = StatisticsReporter()
    reporter.print_statistics(collector, duration_seconds=duration)
    return collector


async def run_pebble(config):
    """Run pebble-game trials for each requested adversary and print a summary."""
    n = config['piles']
    rounds = config['rounds'] if config['rounds'] is not None else n
    c = config['budget'] if config['budget'] is not None else default_budget(n)
    adversaries = ADVERSARIES if config['adversary'] == 'all' else (config['adversary'],)
    if n < 1 or c < 1 or rounds < 0 or config['seeds'] < 1:
        raise InvalidSpec("piles, budget and seeds must be positive and rounds nonnegative")

    print(f"Playing {config['seeds']} seeds x {len(adversaries)} adversaries (n={n}, c={c}, rounds={rounds})")
    executor = ProcessPoolExecutor(max_workers=config['workers']) if config.get('workers') else None
    try:
        results = await run_trials(n, rounds, c, adversaries, range(config['seeds']),
                                   alternate=config.get('alternate', False), executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()

    if config.get('csv'):
        emit_pebble_csv(results, config['csv'])
        print(f"Pebble results written to {config['csv']}")
    print(StatisticsReporter().format_pebble_report(summarize(results)))
    return results


def run_validate(config):
    """Append n keys to a nested forest and check every structural invariant."""
    n = config['n']
    if n < 0:
        raise InvalidSpec(f"n must be nonnegative, got {n}")
    forest = NestedForest()
    for i in range(n):
        forest.append_leaf((i + 1) * KEY_GAP)
    result = validate(forest)
    if result.ok:
        print(f"Nested forest with {len(forest)} leaves is valid "
              f"(height {forest.height}, nesting depth {forest.nesting_depth})")
    else:
        print(f"Invariant violated: {result.violation}")
    return result


def main(argv=None):
    """Main entry point for the benchmark driver"""
    config = load_config(argv)
    logging.basicConfig(
        level=logging.DEBUG if config['verbose'] else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    command = config['command']
    if command is None:
        build_parser().print_help()
        sys.exit(EXIT_INVALID)

    try:
        if command in ('bench', 'diff'):
            run_bench(config)
        elif command == 'pebble':
            asyncio.run(run_pebble(config))
        elif not run_validate(config).ok:
            sys.exit(EXIT_DIVERGENCE)
    except DivergenceDetected as e:
        report_divergence(e, config.get('prefix_out'))
        sys.exit(EXIT_DIVERGENCE)
    except (InvalidSpec, IoFailure) as e:
        print(f"Error: {e}")
        sys.exit(EXIT_INVALID)
    except FingerDictError as e:
        logger.exception("Unexpected structure error")
        print(f"Error: Unexpected error - {e}")
        sys.exit(EXIT_DIVERGENCE)
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
