"""
Module for generating reports from probe measurements.

This module formats probe statistics for console output and writes the
CSV files consumed by plotting scripts: one row per measured search, and
one row per pebble game.
"""

import csv
import shutil

from .exceptions import IoFailure

PROBE_CSV_HEADER = ["structure", "n", "d", "probes", "wall_nanos", "op_kind"]
PEBBLE_CSV_HEADER = ["seed", "adversary", "n", "c", "rounds", "M"]


class StatisticsReporter:
    """
    Class for generating formatted reports from probe statistics.
    """

    def __init__(self):
        # Get terminal width or use default if not available
        try:
            self._default_terminal_width = shutil.get_terminal_size().columns
        except (AttributeError, OSError):
            self._default_terminal_width = 80

    def format_console_report(self, collector, terminal_width=None, duration_seconds=None):
        """
        Format mean probes per distance band for every structure.

        Args:
            collector (ProbeStatisticsCollector): Measurements to format.
            terminal_width (int, optional): Width of the terminal to format for.
            duration_seconds (float, optional): Duration of the run in seconds.

        Returns:
            str: Formatted report for console output.
        """
        width = terminal_width or self._default_terminal_width

        report = ["Probe Statistics Summary".center(width)]
        report.append("=" * width)
        report.append("")

        structures = collector.structures()
        if not structures:
            report.append("No searches measured.")
        for structure in structures:
            report.append(f"{structure}:")
            report.append(f"  {'d band':>10} {'searches':>10} {'mean probes':>12}")
            for band, (count, mean) in collector.distance_bands(structure).items():
                label = "0" if band == 0 else f"{band}-{2 * band - 1}"
                report.append(f"  {label:>10} {count:>10} {mean:>12.2f}")
            report.append("")

        if duration_seconds is not None:
            minutes, seconds = divmod(duration_seconds, 60)
            report.append(f"Duration: {int(minutes)}m {seconds:.1f}s")

        return "\n".join(report)

    def format_pebble_report(self, summary, terminal_width=None):
        """
        Format per-adversary pebble-game results.

        Args:
            summary (dict): adversary -> (games, max M, p99 M), as from pebble_game.summarize.
        """
        width = terminal_width or self._default_terminal_width
        report = ["Pebble Game Summary".center(width), "=" * width, ""]
        report.append(f"{'adversary':<16} {'games':>8} {'max M':>8} {'p99 M':>8}")
        for kind in sorted(summary):
            games, worst, p99 = summary[kind]
            report.append(f"{kind:<16} {games:>8} {worst:>8} {p99:>8}")
        return "\n".join(report)

    def print_statistics(self, collector, duration_seconds=None):
        print(self.format_console_report(collector, duration_seconds=duration_seconds))


def _write_rows(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as csvfile:
            writer = csv.writer(csvfile, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as error:
        raise IoFailure(f"Cannot write CSV file '{path}': {error}")


def emit_csv(report, path):
    """
    Write a probe report as CSV, header then one row per measured search.

    Args:
        report (ProbeReport): Rows to write.
        path (str): Output file path.

    Raises:
        IoFailure: If the file cannot be written.
    """
    _write_rows(path, PROBE_CSV_HEADER, (tuple(row) for row in report.rows))


def emit_pebble_csv(results, path):
    """
    Write one row per pebble game: seed, adversary, n, c, rounds, M.

    Raises:
        IoFailure: If the file cannot be written.
    """
    _write_rows(path, PEBBLE_CSV_HEADER,
                ((r.seed, r.adversary, r.n, r.c, r.rounds, r.M) for r in results))
