"""Filtered, self-decimated LFSR generator.

Each clock looks at the current register: the filter is evaluated on all 16
cells and the register's own output bit (cell 0) decides whether the filter
bit is kept.  The register then advances once.  Kept bits go through a small
FIFO that only smooths timing.

Because the register walks a single 65535-state cycle, the kept-bit stream
from any seed is a rotation of one fixed 32768-bit cycle.  The fast helpers
below index into that cycle; :class:`Prng` is the bit-serial model they are
tested against.
"""

from __future__ import annotations

from collections import deque
from functools import lru_cache

import numpy as np

from .boolfn import filter_eval, filter_table
from .lfsr import LENGTH, PERIOD, LfsrState, lfsr_clock, lfsr_new, state_cycle, state_position

BUFFER_SIZE = 4
WORD_BITS = 16


class Prng:
    def __init__(self, seed: int, buffer_size: int = BUFFER_SIZE):
        if buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        self.state: LfsrState = lfsr_new(seed)
        self.buffer: deque[int] = deque()
        self.buffer_size = buffer_size
        self.emitted_count = 0
        self.clock_count = 0

    @classmethod
    def from_state(cls, state: LfsrState, buffer_size: int = BUFFER_SIZE) -> "Prng":
        g = cls(1, buffer_size)
        g.state = state
        return g

    def clock_once(self) -> int | None:
        """Advance one clock; return the filter bit if the gate kept it.

        Bypasses the FIFO, so do not interleave with :meth:`next_bit`.
        """
        gate = self.state.cells[0]
        bit = filter_eval(self.state.word)
        _, self.state = lfsr_clock(self.state)
        self.clock_count += 1
        if gate:
            self.emitted_count += 1
            return bit
        return None

    def _produce(self) -> int:
        # the gate sequence is an m-sequence, so a kept bit always arrives
        # within 16 clocks of a nonzero state
        while True:
            bit = self.clock_once()
            if bit is not None:
                return bit

    def next_bit(self) -> int:
        if not self.buffer:
            self.buffer.append(self._produce())
            while len(self.buffer) < self.buffer_size:
                self.buffer.append(self._produce())
        return self.buffer.popleft()

    def next_word(self) -> int:
        word = 0
        for k in range(WORD_BITS):
            word |= self.next_bit() << k
        return word

    def bits(self, n: int) -> list[int]:
        return [self.next_bit() for _ in range(n)]


def prng_new(seed: int) -> Prng:
    return Prng(seed)


# -- cycle tables -------------------------------------------------------------

@lru_cache(maxsize=None)
def _tables() -> tuple[np.ndarray, np.ndarray]:
    states = state_cycle()
    gate = (states & 1).astype(np.uint8)
    kept = filter_table()[states][gate == 1]
    # kept_before[p] = number of kept bits among clocks 0..p-1 of the cycle
    kept_before = np.concatenate(([0], np.cumsum(gate, dtype=np.int64)))
    kept.flags.writeable = False
    kept_before.flags.writeable = False
    return kept, kept_before


def output_cycle() -> np.ndarray:
    """The kept-bit cycle (32768 bits) seen from seed 0x0001."""
    return _tables()[0]


def stream_offset(seed) -> np.ndarray | int:
    """Index into :func:`output_cycle` where the stream for ``seed`` starts.

    Vectorised over array input.  Seeds whose leading clocks are all gated off
    share an offset with the first seed that emits.
    """
    kept, kept_before = _tables()
    pos = state_position()[np.asarray(seed, dtype=np.int64) & 0xFFFF]
    off = kept_before[pos] % kept.size
    return int(off) if np.ndim(off) == 0 else off


def prng_keystream(seed: int, nbits: int) -> np.ndarray:
    """First ``nbits`` output bits of a fresh generator, as a uint8 array."""
    if nbits < 0:
        raise ValueError("nbits must be non-negative")
    kept = output_cycle()
    idx = (stream_offset(seed) + np.arange(nbits)) % kept.size
    return kept[idx]


def keystreams(seeds, nbits: int) -> np.ndarray:
    """Keystreams for many seeds at once, shape (len(seeds), nbits)."""
    kept = output_cycle()
    off = np.atleast_1d(stream_offset(np.asarray(seeds)))
    idx = (off[:, None] + np.arange(nbits)[None, :]) % kept.size
    return kept[idx]


def clocks_for(seed: int, nbits: int) -> int:
    """Clocks a fresh generator needs to emit its first ``nbits`` bits."""
    if nbits == 0:
        return 0
    kept, kept_before = _tables()
    p = int(state_position()[seed & 0xFFFF])
    target = int(kept_before[p]) + nbits
    cycles, rem = divmod(target - 1, kept.size)
    # clock index (within a cycle) of the rem-th kept bit, 0-based
    t = int(np.searchsorted(kept_before, rem + 1)) - 1
    return cycles * PERIOD + t - p + 1


def emitted_in(seed, clocks: int) -> np.ndarray | int:
    """Bits emitted during the first ``clocks`` clocks from ``seed`` (vectorised)."""
    kept, kept_before = _tables()
    p = state_position()[np.asarray(seed, dtype=np.int64) & 0xFFFF]
    full, rem = divmod(clocks, PERIOD)
    end = p + rem
    wrapped = end > PERIOD
    partial = np.where(wrapped,
                       kept_before[PERIOD] - kept_before[p] + kept_before[np.where(wrapped, end - PERIOD, 0)],
                       kept_before[np.minimum(end, PERIOD)] - kept_before[p])
    out = full * kept.size + partial
    return int(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=None)
def window_table(start: int, width: int) -> np.ndarray:
    """For every 16-bit seed, output bits ``start .. start+width-1`` packed LSB-first.

    Returned as uint64, so ``width`` <= 64.
    """
    if not 1 <= width <= 64:
        raise ValueError("width must be in 1..64")
    kept = output_cycle()
    n = kept.size
    ext = np.concatenate((kept, kept[: width + 1])).astype(np.uint64)
    packed = np.zeros(n, dtype=np.uint64)
    for j in range(width):
        packed |= ext[j:j + n] << np.uint64(j)
    offsets = (np.asarray(stream_offset(np.arange(1 << LENGTH))) + start) % n
    table = packed[offsets]
    table.flags.writeable = False
    return table


def prng_next_words(seed: int, count: int) -> np.ndarray:
    """First ``count`` 16-bit words of a fresh generator."""
    bits = prng_keystream(seed, count * WORD_BITS).reshape(count, WORD_BITS).astype(np.int64)
    return (bits << np.arange(WORD_BITS)).sum(axis=1)


def update_credential(c: int) -> int:
    """First output word of a fresh generator seeded with ``c``."""
    return int(window_table(0, WORD_BITS)[c & 0xFFFF])


def update_table() -> np.ndarray:
    return window_table(0, WORD_BITS)
