"""DecreaseKey/Delete on top of any Insert/ExtractMin queue.

Every insertion into the base queue uses an augmented key (key << 32) | C,
where C is the wrapper's operation counter, so repeated DecreaseKeys of one
key coexist as distinct base entries.  ExtractMin filters what the base
returns: a popped pair is stale, and silently discarded, when its key was
already extracted in its current lifetime (the extracted-key table H), was
never inserted, or carries a counter older than the key's most recent
insert.  H drops a key when it is re-inserted, so re-insertion after
extraction is legal.

Delete is the two-step recipe: DecreaseKey to the minimal sentinel, then one
ExtractMin whose result is discarded; an absent key is a free-table no-op.
Global rebuilding keeps the base size proportional to the live count: after
N0 operations everything is drained, filtered, and re-inserted into a fresh
base, and N0 becomes max(|live|/2, N0_min).

The tables are internal-memory state charged zero probes; when the base is
an external-memory queue only base probes count.  This asymmetry is
inherent to the construction and is reported, not hidden.
"""

from __future__ import annotations

import ast

from .errors import ConfigError, DuplicateKeyError, EmptyQueueError
from .pq.base import PriorityQueueBase

CTR_BITS = 32
CTR_MASK = (1 << CTR_BITS) - 1


class ReducedQueue(PriorityQueueBase):
    supports_decrease_key = True
    supports_delete = True

    def __init__(self, base, n0_min: int = 16, rebuild: bool = True):
        self.base = base
        self.name = f"dk_{base.name}"
        self.n0_min = n0_min
        self.rebuild_enabled = rebuild
        base_w = getattr(base, "w", None)
        self._key_limit = 1 << (base_w - CTR_BITS) if base_w is not None else None
        if self._key_limit is not None and self._key_limit < 2:
            raise ConfigError(f"base word width {base_w} leaves no room for {CTR_BITS} counter bits")
        if base_w is not None:
            self._delete_sentinel = -(1 << (base_w - 1))
        else:
            self._delete_sentinel = -(1 << 63)
        self._ctr = 0
        self._ops_since = 0
        self._n0 = n0_min
        self._extracted: set[int] = set()      # H
        self._last_insert: dict[int, int] = {}  # key -> C of most recent insert
        self._live = 0
        self.rebuilds = 0
        self.stale_discards = 0
        self.absent_decreases = 0

    @property
    def device(self):
        return getattr(self.base, "device", None)

    def __len__(self) -> int:
        return self._live

    def is_live(self, key: int) -> bool:
        return key in self._last_insert and key not in self._extracted

    def _aug(self, key: int, c: int) -> int:
        if self._key_limit is not None and key >= self._key_limit:
            raise ConfigError(f"key {key} leaves no room for the counter in the base key word")
        return (key << CTR_BITS) | c

    def _next_op(self) -> int:
        """Counter value for this operation; the first operation sees 0."""
        c = self._ctr
        self._ctr += 1
        if self._ctr > CTR_MASK:
            raise ConfigError("wrapper operation counter overflowed its 32-bit field")
        self._ops_since += 1
        return c

    def _maybe_rebuild(self) -> None:
        if self.rebuild_enabled and self._ops_since >= self._n0:
            self.rebuild()

    # -- operations -----------------------------------------------------------

    def insert(self, key: int, priority: int) -> None:
        if self.is_live(key):
            raise DuplicateKeyError(f"key {key} is already live")
        c = self._next_op()
        self.base.insert(self._aug(key, c), priority)
        self._last_insert[key] = c
        self._extracted.discard(key)
        self._live += 1
        self._maybe_rebuild()

    def decrease_key(self, key: int, priority: int) -> None:
        c = self._next_op()
        if not self.is_live(key):
            self.absent_decreases += 1
        self.base.insert(self._aug(key, c), priority)
        self._maybe_rebuild()

    def extract_min(self) -> tuple[int, int]:
        pair = self._pop_live()
        if pair is None:
            if self._live:
                raise AssertionError("live count positive but base queue exhausted")
            raise EmptyQueueError("no logically live element to extract")
        self._next_op()
        self._maybe_rebuild()
        return pair

    def _pop_live(self) -> tuple[int, int] | None:
        while True:
            try:
                aug, priority = self.base.extract_min()
            except EmptyQueueError:
                return None
            key, ck = aug >> CTR_BITS, aug & CTR_MASK
            last = self._last_insert.get(key)
            if key in self._extracted or last is None or ck < last:
                self.stale_discards += 1
                continue
            self._extracted.add(key)
            self._live -= 1
            return key, priority

    def delete(self, key: int) -> None:
        if not self.is_live(key):
            self._next_op()
            self._maybe_rebuild()
            return
        self.delete_key(key)

    def delete_key(self, key: int) -> None:
        if not self.is_live(key):
            raise KeyError(f"Delete on absent key {key}")
        self.decrease_key(key, self._delete_sentinel)
        key_out, _ = self.extract_min()
        if key_out != key:
            raise AssertionError(f"delete recipe extracted {key_out} instead of {key}")

    def rebuild(self) -> None:
        """Drain live elements, reset the base, and re-insert them."""
        drained: list[tuple[int, int]] = []
        while True:
            pair = self._pop_live()
            if pair is None:
                break
            drained.append(pair)
        self.base.clear()
        self._extracted.clear()
        self._last_insert.clear()
        self._live = 0
        for key, priority in drained:
            c = self._ctr
            self._ctr += 1
            self.base.insert(self._aug(key, c), priority)
            self._last_insert[key] = c
            self._live += 1
        self._n0 = max(len(drained) // 2, self.n0_min)
        self._ops_since = 0
        self.rebuilds += 1

    def clear(self) -> None:
        self.base.clear()
        self._ctr = 0
        self._ops_since = 0
        self._n0 = self.n0_min
        self._extracted.clear()
        self._last_insert.clear()
        self._live = 0

    @property
    def n0(self) -> int:
        return self._n0

    def report_stats(self) -> dict[str, int]:
        return {
            "base": self.base.name,
            "ops": self._ctr,
            "rebuilds": self.rebuilds,
            "stale_discards": self.stale_discards,
            "absent_decreases": self.absent_decreases,
            "live": self._live,
            "probes": self.device.probe_count if self.device is not None else 0,
        }

    # -- snapshot ----------------------------------------------------------------

    def memory_image(self) -> bytes:
        state = (
            self._ctr, self._ops_since, self._n0, self._live,
            self.rebuilds, self.stale_discards, self.absent_decreases,
            sorted(self._extracted), sorted(self._last_insert.items()),
            self.base.memory_image().decode(),
        )
        return repr(state).encode()

    def load_memory_image(self, image: bytes) -> None:
        (self._ctr, self._ops_since, self._n0, self._live,
         self.rebuilds, self.stale_discards, self.absent_decreases,
         extracted, last_insert, base_image) = ast.literal_eval(image.decode())
        self._extracted = set(extracted)
        self._last_insert = dict(last_insert)
        self.base.load_memory_image(base_image.encode())
