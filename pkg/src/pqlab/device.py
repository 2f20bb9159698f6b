"""Block device with probe counting.

The machine model: an addressable array of blocks, each holding exactly B
words of w bits, plus M words of main memory that is free to examine.  Every
block read or write is one probe and is appended to the device log together
with the operation context set by the caller.  The device performs no
caching; deciding what lives in the M-word memory is the data structure's
job, and accesses to that memory never appear in the log.

Blocks are zero-initialized and the address space is stored sparsely as a
map from address to block tuple, so w may be large.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import AddressError, BlockSizeError, ConfigError

READ = "read"
WRITE = "write"


@dataclass(frozen=True)
class DeviceConfig:
    """B words per block, M words of memory, w bits per word; M >= 2B."""

    B: int
    M: int
    w: int

    def __post_init__(self) -> None:
        if self.B <= 0 or self.M <= 0 or self.w <= 0:
            raise ConfigError(f"parameters must be positive, got {self}")
        if self.M < 2 * self.B:
            raise ConfigError(f"memory must hold at least two blocks: M={self.M} < 2B={2 * self.B}")

    @property
    def word_limit(self) -> int:
        return 1 << self.w

    @property
    def block_bits(self) -> int:
        return self.B * self.w

    @property
    def memory_bits(self) -> int:
        return self.M * self.w


class ProbeRecord(NamedTuple):
    seq: int
    op_index: int | None
    leaf_id: int | None
    addr: int
    access: str


class Device:
    """Probe-logging block store.

    A device instance is single-threaded; independent trials use independent
    devices.  ``peek_block``/``poke_block`` bypass the log and exist only for
    replication plumbing (state snapshots, protocol content transfer); they
    are not part of the cost model.
    """

    def __init__(self, config: DeviceConfig):
        self.config = config
        self._blocks: dict[int, tuple[int, ...]] = {}
        self._zero = (0,) * config.B
        self.log: list[ProbeRecord] = []
        self._op_index: int | None = None
        self._leaf_id: int | None = None

    # -- context ------------------------------------------------------------

    def set_context(self, op_index: int | None, leaf_id: int | None) -> None:
        """Tag subsequent probes with the current operation and leaf."""
        self._op_index = op_index
        self._leaf_id = leaf_id

    # -- probes -------------------------------------------------------------

    def _check_addr(self, addr: int) -> None:
        if not 0 <= addr < self.config.word_limit:
            raise AddressError(f"address {addr} outside [0, 2^{self.config.w})")

    def read_block(self, addr: int) -> tuple[int, ...]:
        self._check_addr(addr)
        self.log.append(ProbeRecord(len(self.log), self._op_index, self._leaf_id, addr, READ))
        return self._blocks.get(addr, self._zero)

    def write_block(self, addr: int, block: Iterable[int]) -> None:
        self._check_addr(addr)
        blk = tuple(block)
        if len(blk) != self.config.B:
            raise BlockSizeError(f"block has {len(blk)} words, expected {self.config.B}")
        limit = self.config.word_limit
        for word in blk:
            if not 0 <= word < limit:
                raise BlockSizeError(f"word {word} does not fit in {self.config.w} bits")
        self._blocks[addr] = blk
        self.log.append(ProbeRecord(len(self.log), self._op_index, self._leaf_id, addr, WRITE))

    @property
    def probe_count(self) -> int:
        return len(self.log)

    # -- unlogged plumbing ----------------------------------------------------

    def peek_block(self, addr: int) -> tuple[int, ...]:
        self._check_addr(addr)
        return self._blocks.get(addr, self._zero)

    def poke_block(self, addr: int, block: Iterable[int]) -> None:
        self._check_addr(addr)
        blk = tuple(block)
        if len(blk) != self.config.B:
            raise BlockSizeError(f"block has {len(blk)} words, expected {self.config.B}")
        self._blocks[addr] = blk

    def copy(self) -> "Device":
        """Clone block contents into a fresh device with an empty log."""
        dup = Device(self.config)
        dup._blocks = dict(self._blocks)
        return dup

    # -- export ---------------------------------------------------------------

    def export_log_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["seq", "op_index", "leaf_id", "addr", "access"])
            for rec in self.log:
                writer.writerow([rec.seq, _blank(rec.op_index), _blank(rec.leaf_id), rec.addr, rec.access])


def _blank(value: int | None):
    return "" if value is None else value
