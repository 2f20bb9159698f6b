"""Buffered multiway heap for Insert/ExtractMin over a probe-counted device.

An f-ary tree of on-disk node buffers, f derived from M/B.  Each node keeps
two buffers: ``tops``, an authoritative prefix of its subtree's minima
(every entry below the node is >= the tops maximum), and ``pending``,
entries in transit toward the leaves.  An arriving entry joins ``tops`` only
when it beats the current maximum or the subtree holds nothing else;
otherwise it rides ``pending``, which flushes one level down to a
round-robin child when full.  ExtractMin pops the root's ``tops`` (held in
the M-word memory) and, when empty, refills it by cursor-merging child
minima; a refill flushes the node's own ``pending`` first so no small entry
is overlooked.  Entries move in half-buffer batches both ways, targeting
O((1/B) log_{M/B} N) probes per operation amortized; the constant is
asserted as a measured regression bound, not proved.

Node arena layout: block 0 opens with [n_tops, n_pending, round_robin,
tops_offset, max_key, max_prio, max_ts, 0]; the sorted tops region follows
the header, the pending region sits behind it at a fixed offset, entries
packed 3 words each.  Two access paths keep probes near the batching lower
bound: tops are consumed front-first by bumping ``tops_offset`` (a refill
reads only blocks it merges from and writes one header block per consumed
child), and a flush whose batch provably misses the child's tops appends to
the pending region without reading the rest of the node.  In-memory
occupancy bitmaps say which arenas mean anything, making ``clear()`` free.
Resident state is audited against the M-word budget at construction;
transient merge scratch is simulated in host memory and not charged.
"""

from __future__ import annotations

import ast
import bisect
import heapq

from ..errors import ConfigError, EmptyQueueError, EncodingError, StructureOverflowError
from .base import PriorityQueueBase

HEADER_WORDS = 8
ENTRY_WORDS = 3
LEAF_TOPS_FACTOR = 4


class _Node:
    __slots__ = ("tops", "pending", "rr")

    def __init__(self, tops=None, pending=None, rr=0):
        self.tops = tops if tops is not None else []
        self.pending = pending if pending is not None else []
        self.rr = rr


class _Cursor:
    """Lazy front-consumption of one child's sorted tops region."""

    __slots__ = ("owner", "x", "blocks", "n_tops", "n_pending", "off", "eaten", "mode", "full")

    def __init__(self, owner: "BufferedHeap", x: int):
        self.owner = owner
        self.x = x
        words0 = owner._read_block_of(x, 0)
        self.blocks = {0: words0}
        self.n_tops, self.n_pending, _, self.off = words0[:4]
        self.eaten = 0
        self.mode = "clean"  # clean | consumed | full
        self.full: _Node | None = None

    def _word(self, pos: int) -> int:
        b, i = divmod(pos, self.owner.B)
        blk = self.blocks.get(b)
        if blk is None:
            blk = self.owner._read_block_of(self.x, b)
            self.blocks[b] = blk
        return blk[i]

    def head(self) -> tuple[int, int, int] | None:
        if self.mode == "full":
            return self.full.tops[0] if self.full.tops else None
        if self.eaten >= self.n_tops:
            return None
        pos = HEADER_WORDS + ENTRY_WORDS * (self.off + self.eaten)
        return (self._word(pos + 1) - self.owner._prio_bias, self._word(pos), self._word(pos + 2))

    def pop(self) -> tuple[int, int, int]:
        if self.mode == "full":
            return self.full.tops.pop(0)
        entry = self.head()
        self.eaten += 1
        self.mode = "consumed"
        return entry

    def exhausted_with_more_below(self) -> bool:
        if self.mode == "full":
            return False
        if self.eaten < self.n_tops:
            return False
        o = self.owner
        return self.n_pending > 0 or (not o._is_leaf(self.x) and o._below_maybe(self.x))

    def promote(self) -> _Node:
        """Switch to a fully loaded node for recursive refilling."""
        node = self.owner._load(self.x)
        node.tops = node.tops[self.eaten :]
        self.full = node
        self.mode = "full"
        return node

    def writeback(self) -> None:
        o = self.owner
        if self.mode == "full":
            o._store(self.x, self.full)
            return
        if self.mode != "consumed":
            return
        words0 = self.blocks[0]
        words0[0] = self.n_tops - self.eaten
        words0[3] = self.off + self.eaten
        o.device.write_block(o._node_base(self.x), words0)
        if words0[0] == 0 and self.n_pending == 0:
            if o._is_leaf(self.x) or not o._below_maybe(self.x):
                o._maybe.discard(self.x)


class BufferedHeap(PriorityQueueBase):
    supports_decrease_key = False
    supports_delete = False
    name = "buffered_heap"

    def __init__(self, device, n_hint: int = 1 << 14):
        self.device = device
        cfg = device.config
        self.B, self.M, self.w = cfg.B, cfg.M, cfg.w
        self.cap = max(4, (self.M - 64) // 12)
        self.leaf_tops_cap = LEAF_TOPS_FACTOR * self.cap
        self.fanout = min(8, max(2, self.M // (2 * self.B)))

        depth = 1
        while self._capacity(depth) < 2 * n_hint + self.cap:
            depth += 1
        self.depth = depth
        self.first_leaf = (self.fanout**depth - 1) // (self.fanout - 1)
        self.n_nodes = (self.fanout ** (depth + 1) - 1) // (self.fanout - 1)

        self._internal_blocks = self._blocks_for(HEADER_WORDS + ENTRY_WORDS * (2 * self.cap))
        self._leaf_blocks = self._blocks_for(HEADER_WORDS + ENTRY_WORDS * (self.leaf_tops_cap + self.cap))
        if self._node_base(self.n_nodes) >= cfg.word_limit:
            raise ConfigError("address space too small for the heap arena; increase w")

        self._prio_bias = 1 << (self.w - 1)
        self._root = _Node()
        self._clock = 0
        self._live = 0
        self._maybe: set[int] = set()    # subtree may hold entries
        self._written: set[int] = set()  # arena holds meaningful words since clear()

        bitmap_words = 2 * ((self.n_nodes + 63) // 64)
        resident = 2 * ENTRY_WORDS * self.cap + bitmap_words + 8
        if resident > self.M - 2 * self.B:
            raise ConfigError(
                f"M={self.M} words cannot hold the root node plus bookkeeping ({resident} words)"
            )

    # -- geometry -------------------------------------------------------------

    def _capacity(self, depth: int) -> int:
        internal = sum(self.fanout**i for i in range(depth))
        return 2 * self.cap * internal + (self.leaf_tops_cap + self.cap) * self.fanout**depth

    def _blocks_for(self, words: int) -> int:
        return (words + self.B - 1) // self.B

    def _children(self, x: int) -> range:
        return range(self.fanout * x + 1, self.fanout * x + 1 + self.fanout)

    def _is_leaf(self, x: int) -> bool:
        return x >= self.first_leaf

    def _node_base(self, x: int) -> int:
        if x <= self.first_leaf:
            return x * self._internal_blocks
        return self.first_leaf * self._internal_blocks + (x - self.first_leaf) * self._leaf_blocks

    def _tops_cap(self, x: int) -> int:
        return self.leaf_tops_cap if self._is_leaf(x) else self.cap

    def _pending_base(self, x: int) -> int:
        return HEADER_WORDS + ENTRY_WORDS * self._tops_cap(x)

    def _below_maybe(self, x: int) -> bool:
        return any(c in self._maybe for c in self._children(x))

    # -- node I/O ---------------------------------------------------------------

    def _read_block_of(self, x: int, b: int) -> list[int]:
        return list(self.device.read_block(self._node_base(x) + b))

    def _read_span(self, x: int, lo: int, hi: int, cache: dict[int, list[int]]) -> None:
        if hi <= lo:
            return
        for b in range(lo // self.B, (hi - 1) // self.B + 1):
            if b not in cache:
                cache[b] = self._read_block_of(x, b)

    def _load(self, x: int) -> _Node:
        if x == 0:
            return self._root
        if x not in self._written:
            return _Node()
        cache: dict[int, list[int]] = {0: self._read_block_of(x, 0)}
        n_tops, n_pending, rr, off = cache[0][:4]
        pb = self._pending_base(x)
        self._read_span(x, HEADER_WORDS + ENTRY_WORDS * off,
                        HEADER_WORDS + ENTRY_WORDS * (off + n_tops), cache)
        self._read_span(x, pb, pb + ENTRY_WORDS * n_pending, cache)

        def word(pos: int) -> int:
            return cache[pos // self.B][pos % self.B]

        bias = self._prio_bias
        tops = []
        for i in range(n_tops):
            pos = HEADER_WORDS + ENTRY_WORDS * (off + i)
            tops.append((word(pos + 1) - bias, word(pos), word(pos + 2)))
        pending = []
        for i in range(n_pending):
            pos = pb + ENTRY_WORDS * i
            pending.append((word(pos + 1) - bias, word(pos), word(pos + 2)))
        return _Node(tops, pending, rr)

    def _store(self, x: int, node: _Node) -> None:
        if x == 0:
            self._root = node
            self._refresh_maybe(x, node)
            return
        bias = self._prio_bias
        pb = self._pending_base(x)
        t_end = HEADER_WORDS + ENTRY_WORDS * len(node.tops)
        p_end = pb + ENTRY_WORDS * len(node.pending)
        words = [0] * (self._blocks_for(max(t_end, p_end)) * self.B)
        words[0], words[1], words[2], words[3] = len(node.tops), len(node.pending), node.rr, 0
        if node.tops:
            mp, mk, mts = node.tops[-1]
            words[4], words[5], words[6] = mk, mp + bias, mts
        pos = HEADER_WORDS
        for p, k, ts in node.tops:
            words[pos : pos + ENTRY_WORDS] = (k, p + bias, ts)
            pos += ENTRY_WORDS
        pos = pb
        for p, k, ts in node.pending:
            words[pos : pos + ENTRY_WORDS] = (k, p + bias, ts)
            pos += ENTRY_WORDS
        touched = set(range(0, (t_end - 1) // self.B + 1))
        if node.pending:
            touched.update(range(pb // self.B, (p_end - 1) // self.B + 1))
        base = self._node_base(x)
        for b in sorted(touched):
            self.device.write_block(base + b, words[b * self.B : (b + 1) * self.B])
        self._written.add(x)
        self._refresh_maybe(x, node)

    def _refresh_maybe(self, x: int, node: _Node) -> None:
        if node.tops or node.pending or (not self._is_leaf(x) and self._below_maybe(x)):
            self._maybe.add(x)
        else:
            self._maybe.discard(x)

    # -- arrival and flush ---------------------------------------------------------

    def _absorb(self, x: int, node: _Node, incoming: list[tuple[int, int, int]]) -> None:
        """Merge arriving entries into tops where provable, else into pending."""
        tops = node.tops
        if not tops and not node.pending and (self._is_leaf(x) or not self._below_maybe(x)):
            node.tops = sorted(incoming)
        else:
            for e in sorted(incoming):
                if tops and e < tops[-1]:
                    bisect.insort(tops, e)
                else:
                    node.pending.append(e)
        cap_t = self._tops_cap(x)
        if self._is_leaf(x):
            if node.pending:
                node.tops = list(heapq.merge(node.tops, sorted(node.pending)))
                node.pending = []
            if len(node.tops) > cap_t:
                raise StructureOverflowError(
                    f"leaf {x} overflow ({len(node.tops)} entries); construct with a larger n_hint"
                )
            return
        while len(node.tops) > cap_t:
            node.pending.append(node.tops.pop())
        if len(node.pending) > self.cap:
            self._flush(x, node)

    def _flush(self, x: int, node: _Node) -> None:
        moved = node.pending
        node.pending = []
        child = self._children(x)[node.rr]
        node.rr = (node.rr + 1) % self.fanout
        if not self._lazy_append(child, moved):
            cnode = self._load(child)
            self._absorb(child, cnode, moved)
            self._store(child, cnode)
        self._refresh_maybe(x, node)

    def _lazy_append(self, child: int, moved: list[tuple[int, int, int]]) -> bool:
        """Append to the child's pending region without loading the node.

        Applies only when the batch provably cannot enter the child's tops:
        the child must hold something already, the incoming minimum must not
        beat the tops maximum, and the pending region must have room.
        """
        if child not in self._written:
            return False
        words0 = self._read_block_of(child, 0)
        n_tops, n_pending = words0[0], words0[1]
        if n_pending + len(moved) > self.cap:
            return False
        if n_tops == 0:
            # Arrivals may enter tops only when the whole subtree is empty.
            if n_pending == 0 and (self._is_leaf(child) or not self._below_maybe(child)):
                return False
        else:
            bias = self._prio_bias
            max_top = (words0[5] - bias, words0[4], words0[6])
            if min(moved) < max_top:
                return False
        if self._is_leaf(child) and n_tops + n_pending + len(moved) > self.leaf_tops_cap:
            return False
        pb = self._pending_base(child)
        lo = pb + ENTRY_WORDS * n_pending
        hi = lo + ENTRY_WORDS * len(moved)
        cache = {0: words0}
        first = lo // self.B
        if first != 0 and lo % self.B:
            cache[first] = self._read_block_of(child, first)
        bias = self._prio_bias
        span = [0] * (((hi - 1) // self.B + 1 - first) * self.B)
        base_word = first * self.B
        if first in cache:
            span[: self.B] = cache[first]
        pos = lo - base_word
        for p, k, ts in moved:
            span[pos : pos + ENTRY_WORDS] = (k, p + bias, ts)
            pos += ENTRY_WORDS
        words0[1] = n_pending + len(moved)
        if first == 0:
            span[:HEADER_WORDS] = words0[:HEADER_WORDS]
        else:
            self.device.write_block(self._node_base(child), words0)
        base = self._node_base(child)
        for i in range(0, len(span), self.B):
            self.device.write_block(base + first + i // self.B, span[i : i + self.B])
        self._maybe.add(child)
        return True

    # -- operations ---------------------------------------------------------------

    def __len__(self) -> int:
        return self._live

    def insert(self, key: int, priority: int) -> None:
        if not 0 <= key < (1 << self.w):
            raise EncodingError(f"key {key} does not fit in {self.w}-bit words")
        if not -self._prio_bias <= priority < self._prio_bias:
            raise EncodingError(f"priority {priority} does not fit in {self.w}-bit words")
        self._clock += 1
        if self._clock >= (1 << self.w):
            raise EncodingError("timestamp counter exceeded the word width")
        self._absorb(0, self._root, [(priority, key, self._clock)])
        self._live += 1

    def extract_min(self) -> tuple[int, int]:
        if self._live == 0:
            raise EmptyQueueError("extract from empty queue")
        root = self._root
        if not root.tops:
            self._refill(0, root)
            if not root.tops:
                raise AssertionError("live count positive but no entries found")
        priority, key, _ = root.tops.pop(0)
        self._live -= 1
        self._refresh_maybe(0, root)
        return key, priority

    def _refill(self, x: int, node: _Node) -> None:
        """Fill node.tops with its subtree's minima; own pending flushed first."""
        if self._is_leaf(x):
            if node.pending:
                node.tops = list(heapq.merge(node.tops, sorted(node.pending)))
                node.pending = []
            return
        if node.pending:
            self._flush(x, node)
        if node.tops:
            return
        cursors = [_Cursor(self, c) for c in self._children(x) if c in self._maybe]
        taken: list[tuple[int, int, int]] = []
        while len(taken) < self.cap:
            best = None
            best_head = None
            for cur in cursors:
                head = cur.head()
                if head is None and cur.exhausted_with_more_below():
                    sub = cur.promote()
                    self._refill(cur.x, sub)
                    head = cur.head()
                if head is not None and (best_head is None or head < best_head):
                    best = cur
                    best_head = head
            if best is None:
                break
            taken.append(best.pop())
        node.tops = taken
        for cur in cursors:
            cur.writeback()
        self._refresh_maybe(x, node)

    def clear(self) -> None:
        self._root = _Node()
        self._clock = 0
        self._live = 0
        self._maybe.clear()
        self._written.clear()

    # -- snapshot ----------------------------------------------------------------

    def memory_image(self) -> bytes:
        state = (
            self._clock, self._live, self._root.tops, self._root.pending, self._root.rr,
            sorted(self._maybe), sorted(self._written),
        )
        return repr(state).encode()

    def load_memory_image(self, image: bytes) -> None:
        clock, live, tops, pending, rr, maybe, written = ast.literal_eval(image.decode())
        self._clock, self._live = clock, live
        self._root = _Node([tuple(e) for e in tops], [tuple(e) for e in pending], rr)
        self._maybe = set(maybe)
        self._written = set(written)
