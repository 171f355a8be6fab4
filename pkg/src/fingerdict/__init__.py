# This file marks the fingerdict directory as a Python package

from .bucket_layer import TailFingerDict
from .nested_bdt import NestedForest
from .oracle import OracleDict
from .randomized_dict import RandomizedFingerDict
from .statistics import ProbeStatisticsCollector

__all__ = ['NestedForest', 'OracleDict', 'ProbeStatisticsCollector', 'RandomizedFingerDict', 'TailFingerDict']
