"""Desk-scale laboratory for external-memory priority queues.

Probe-counted block device, instrumented queues (buffered multiway heap,
buffered tournament tree, in-memory oracle), the DecreaseKey reduction via
global rebuilding, adversarial workload trees, probe-to-node attribution,
and a two-phase set-intersection communication game with exact bit
accounting.
"""

__version__ = "0.1.0"

from .device import Device, DeviceConfig, ProbeRecord
from .dk import ReducedQueue
from .ops import DECREASE, DELETE, EXTRACTMIN, INSERT, PRIORITY_DELETE, PRIORITY_INF, Op
from .pq import BufferedHeap, OracleQueue, RunReport, TournamentQueue, run_workload
from .workload import (
    Tree,
    TreeParams,
    Workload,
    build_tree,
    ground_truth,
    materialize,
    make_random_workload,
    read_workload,
    transform_no_spurious,
    write_workload,
)

__all__ = [
    "Device", "DeviceConfig", "ProbeRecord", "ReducedQueue",
    "DECREASE", "DELETE", "EXTRACTMIN", "INSERT", "PRIORITY_DELETE", "PRIORITY_INF", "Op",
    "BufferedHeap", "OracleQueue", "RunReport", "TournamentQueue", "run_workload",
    "Tree", "TreeParams", "Workload", "build_tree", "ground_truth", "materialize",
    "make_random_workload", "read_workload", "transform_no_spurious", "write_workload",
    "__version__",
]
