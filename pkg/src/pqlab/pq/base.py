"""Priority-queue interface and the instrumented workload runner.

Queue implementations expose:

* ``insert(key, priority)``; inserting a live key is a contract violation
  (the oracle detects it, external structures trust the generator).
* ``extract_min() -> (key, priority)``, minimum under (priority, key,
  timestamp).
* ``decrease_key(key, priority)`` where supported: new priority is
  min(old, new); requires a live key.
* ``delete(key)`` where supported: removes the key if present, no effect
  otherwise (the workload model's reading of Delete).
* ``delete_key(key)``: strict variant; raises on an absent key where the
  structure can tell, and is the DecreaseKey-then-ExtractMin recipe on
  DecreaseKey-capable queues.
* ``clear()``, ``memory_image()``/``load_memory_image()`` for global
  rebuilding and snapshot-resume replication.

Capability flags ``supports_decrease_key``/``supports_delete`` gate which
workloads a queue may run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from ..errors import CapabilityError, DivergenceError
from ..ops import DECREASE, DELETE, EXTRACTMIN, INSERT, Op


class PriorityQueueBase:
    supports_decrease_key = False
    supports_delete = False
    name = "abstract"

    def insert(self, key: int, priority: int) -> None:
        raise NotImplementedError

    def extract_min(self) -> tuple[int, int]:
        raise NotImplementedError

    def decrease_key(self, key: int, priority: int) -> None:
        raise CapabilityError(f"{self.name} does not support DecreaseKey")

    def delete(self, key: int) -> None:
        raise CapabilityError(f"{self.name} does not support Delete")

    def delete_key(self, key: int) -> None:
        self.delete(key)

    def clear(self) -> None:
        raise NotImplementedError


@dataclass
class RunReport:
    structure: str
    B: int
    M: int
    w: int
    n_ops: int
    probes_total: int = 0
    probes_insert: int = 0
    probes_delete: int = 0
    probes_extractmin: int = 0
    probes_decrease: int = 0
    seed: int | None = None
    hash_seed: int | None = None  # key-to-position hash seed, when the structure has one
    extractions: list[tuple[int, int]] = field(default_factory=list)

    CSV_HEADER = [
        "structure", "B", "M", "w", "N", "probes_total",
        "probes_insert", "probes_delete", "probes_extractmin", "seed",
    ]

    def csv_row(self) -> list:
        return [
            self.structure, self.B, self.M, self.w, self.n_ops, self.probes_total,
            self.probes_insert, self.probes_delete, self.probes_extractmin,
            "" if self.seed is None else self.seed,
        ]

    @property
    def amortized(self) -> dict[str, float]:
        return {
            "t_all": self.probes_total / max(1, self.n_ops),
        }


def _require_capabilities(queue, ops: list[Op]) -> None:
    kinds = {op.kind for op in ops}
    if DELETE in kinds and not queue.supports_delete:
        raise CapabilityError(
            f"workload contains Delete but {queue.name} does not support it; wrap it in the DecreaseKey reduction"
        )
    if DECREASE in kinds and not queue.supports_decrease_key:
        raise CapabilityError(f"workload contains DecreaseKey but {queue.name} does not support it")


def run_workload(queue, device, workload, check_answers: bool = True) -> RunReport:
    """Execute a workload on an instrumented queue, one context per op.

    The workload's recorded ExtractMin answers (when present) act as the
    oracle transcript; any divergence aborts with a diagnostic.  Probe counts
    are aggregated per operation class from the device log delta.
    """
    ops = workload.ops
    _require_capabilities(queue, ops)
    cfg = device.config
    report = RunReport(
        structure=queue.name, B=cfg.B, M=cfg.M, w=cfg.w, n_ops=len(ops),
        seed=getattr(workload, "seed", None),
        hash_seed=getattr(queue, "hash_seed", None),
    )
    start = device.probe_count
    for idx, op in enumerate(ops):
        device.set_context(idx, op.leaf_id)
        before = device.probe_count
        if op.kind == INSERT:
            queue.insert(op.key, op.priority)
            report.probes_insert += device.probe_count - before
        elif op.kind == DELETE:
            queue.delete(op.key)
            report.probes_delete += device.probe_count - before
        elif op.kind == DECREASE:
            queue.decrease_key(op.key, op.priority)
            report.probes_decrease += device.probe_count - before
        elif op.kind == EXTRACTMIN:
            key, priority = queue.extract_min()
            report.probes_extractmin += device.probe_count - before
            report.extractions.append((key, priority))
            if check_answers and op.key is not None:
                if (key, priority) != (op.key, op.priority):
                    raise DivergenceError(
                        f"op {idx} (leaf {op.leaf_id}): {queue.name} extracted "
                        f"({key},{priority}), oracle transcript says ({op.key},{op.priority})"
                    )
        else:
            raise ValueError(f"unknown op kind {op.kind}")
    device.set_context(None, None)
    report.probes_total = device.probe_count - start
    return report


def write_report_csv(path, reports: list[RunReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RunReport.CSV_HEADER)
        for report in reports:
            writer.writerow(report.csv_row())
