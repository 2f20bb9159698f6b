"""Operation records and the shared tie-break order.

All queues and the workload generator agree on one total order over live
entries: (priority, key, timestamp).  Keys are unique among live entries, so
the timestamp never decides between distinct keys; it exists to make the
order total and replay-deterministic.

``PRIORITY_INF`` is the sentinel standing in for +infinity (it strictly
exceeds every priority the workload generator emits) and ``PRIORITY_DELETE``
is the minimal sentinel used by the DecreaseKey-then-ExtractMin delete
recipe.
"""

from __future__ import annotations

from typing import NamedTuple

PRIORITY_INF = (1 << 63) - 1
PRIORITY_DELETE = -(1 << 63)

INSERT = 1
DELETE = 2
EXTRACTMIN = 3
DECREASE = 4

OP_NAMES = {INSERT: "insert", DELETE: "delete", EXTRACTMIN: "extractmin", DECREASE: "decrease"}


class Op(NamedTuple):
    kind: int
    key: int
    priority: int
    leaf_id: int | None


class Entry(NamedTuple):
    key: int
    priority: int
    timestamp: int

    @property
    def order(self) -> tuple[int, int, int]:
        return (self.priority, self.key, self.timestamp)
