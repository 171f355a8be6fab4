"""
Module for tracking search probes and update work.

This module provides the counters every structure reports into: a work
meter for amortization measurements and thread-safe probe aggregates
for distance-sensitivity measurements.
"""
import json
import threading
from collections import defaultdict


class WorkMeter:
    """Counts work units per category, per update window.

    Structures call ``begin_update`` when an update starts, ``charge`` for each
    unit of work, and ``end_update`` when it finishes. The meter keeps the
    total, the per-category split, the largest single update and the largest
    single-update charge per category.
    """

    def __init__(self):
        self.total = 0
        self.updates = 0
        self.max_update = 0
        self.by_category = defaultdict(int)
        self.max_by_category = defaultdict(int)
        self._current = 0
        self._current_by_category = defaultdict(int)

    def begin_update(self):
        self._current = 0
        self._current_by_category.clear()

    def charge(self, category, units=1):
        self.total += units
        self.by_category[category] += units
        self._current_by_category[category] += units
        self._current += units

    def end_update(self):
        self.updates += 1
        if self._current > self.max_update:
            self.max_update = self._current
        for category, units in self._current_by_category.items():
            if units > self.max_by_category[category]:
                self.max_by_category[category] = units
        self._current = 0
        self._current_by_category.clear()

    @property
    def current(self):
        """Units charged since the last begin_update."""
        return self._current

    def per_update(self):
        """Mean work units per completed update."""
        return self.total / self.updates if self.updates else 0.0

    def reset(self):
        """Reset all counters to zero."""
        self.total = 0
        self.updates = 0
        self.max_update = 0
        self.by_category.clear()
        self.max_by_category.clear()
        self._current = 0
        self._current_by_category.clear()


class ProbeStatistics:
    """Running probe totals for one (structure, distance) cell.

    Thread-safe so that parallel workload runs can share one collector.
    """

    def __init__(self):
        """Initialize a new ProbeStatistics instance with zero counts."""
        self._lock = threading.Lock()
        self._searches = 0
        self._probes = 0
        self._max_probes = 0

    @property
    def searches(self):
        with self._lock:
            return self._searches

    @property
    def probes(self):
        with self._lock:
            return self._probes

    @property
    def max_probes(self):
        with self._lock:
            return self._max_probes

    @property
    def mean_probes(self):
        """Mean probes per search, 0.0 when nothing was tracked."""
        with self._lock:
            return self._probes / self._searches if self._searches else 0.0

    def add(self, probes):
        with self._lock:
            self._searches += 1
            self._probes += probes
            if probes > self._max_probes:
                self._max_probes = probes

    def reset(self):
        """Reset all statistics to zero."""
        with self._lock:
            self._searches = 0
            self._probes = 0
            self._max_probes = 0


class ProbeStatisticsCollector:
    """
    Collects probe measurements by structure and rank distance.

    Measurements can be viewed per structure, per (structure, d) cell, or
    per power-of-two distance band for console reports.
    """

    def __init__(self):
        self._cells = defaultdict(ProbeStatistics)
        self._lock = threading.Lock()

    def track_search(self, structure, d, probes):
        """
        Track one measured search.

        Args:
            structure (str): Structure name, e.g. "nested-bdt".
            d (int): Oracle rank distance between finger and target.
            probes (int): Probes the structure spent on the search.
        """
        with self._lock:
            cell = self._cells[(structure, d)]
        cell.add(probes)

    def get_statistics(self, structure, d):
        with self._lock:
            return self._cells[(structure, d)]

    def mean_probes(self, structure, d):
        """Mean probes of a structure at exact distance d."""
        return self.get_statistics(structure, d).mean_probes

    def structures(self):
        with self._lock:
            return sorted({structure for structure, _ in self._cells})

    def distance_bands(self, structure):
        """
        Aggregate a structure's cells into power-of-two distance bands.

        Args:
            structure (str): Structure name.

        Returns:
            dict: Maps band floor (0, 1, 2, 4, ...) to (searches, mean probes).
        """
        bands = defaultdict(lambda: [0, 0])
        with self._lock:
            cells = [(d, stats) for (name, d), stats in self._cells.items() if name == structure]
        for d, stats in cells:
            band = 0 if d == 0 else 1 << (d.bit_length() - 1)
            bands[band][0] += stats.searches
            bands[band][1] += stats.probes
        return {
            band: (count, total / count if count else 0.0)
            for band, (count, total) in sorted(bands.items())
        }

    def reset_statistics(self):
        with self._lock:
            self._cells.clear()


class StatisticsPersistence:
    """
    Serializes probe aggregates to JSON and back.
    """

    CURRENT_VERSION = "1.0"

    def serialize_to_json(self, collector):
        """
        Serialize a ProbeStatisticsCollector to a JSON string.

        Args:
            collector (ProbeStatisticsCollector): The collector to serialize.

        Returns:
            str: A JSON string with one entry per (structure, d) cell.
        """
        cells = []
        for structure in collector.structures():
            for band, (count, mean) in collector.distance_bands(structure).items():
                cells.append({
                    "structure": structure,
                    "band": band,
                    "searches": count,
                    "mean_probes": mean,
                })
        data = {"version": self.CURRENT_VERSION, "bands": cells}
        return json.dumps(data, indent=2)

    def save_to_file(self, collector, file_path):
        json_data = self.serialize_to_json(collector)

        with open(file_path, 'w') as f:
            f.write(json_data)

    def load_bands(self, file_path):
        """
        Load saved distance bands.

        Args:
            file_path (str): The file path to load from.

        Returns:
            dict: Maps (structure, band) to (searches, mean probes).
        """
        with open(file_path, 'r') as f:
            data = json.loads(f.read())
        return {
            (cell["structure"], cell["band"]): (cell["searches"], cell["mean_probes"])
            for cell in data.get("bands", [])
        }
