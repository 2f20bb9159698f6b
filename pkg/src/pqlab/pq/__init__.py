from .base import RunReport, run_workload
from .oracle import OracleQueue
from .buffered_heap import BufferedHeap
from .tournament import TournamentQueue

__all__ = ["RunReport", "run_workload", "OracleQueue", "BufferedHeap", "TournamentQueue"]
