"""16-stage Fibonacci LFSR with feedback polynomial 1 + x^2 + x^7 + x^9 + x^16.

Cells are stored oldest-first: ``cells[0]`` is s_j, the bit that is emitted
on the next clock, and ``cells[15]`` is s_{j+15}.  Packed into an integer,
bit k of the word is ``cells[k]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

LENGTH = 16
PERIOD = (1 << LENGTH) - 1
ZERO_SEED_REMAP = 0x0001

# prime factors of 2^16 - 1
_PERIOD_FACTORS = (3, 5, 17, 257)


@dataclass(frozen=True)
class FeedbackPolynomial:
    """Feedback polynomial over GF(2); bit k of ``mask`` is the coefficient of x^k."""

    mask: int = (1 << 0) | (1 << 2) | (1 << 7) | (1 << 9) | (1 << 16)

    def __post_init__(self):
        if self.mask.bit_length() - 1 != LENGTH:
            raise ValueError(f"feedback polynomial must have degree {LENGTH}")
        if not self.mask & 1:
            raise ValueError("feedback polynomial must have constant term 1")

    @property
    def degree(self) -> int:
        return self.mask.bit_length() - 1

    @property
    def taps(self) -> tuple[int, ...]:
        """Cell indices XORed into the new bit, i.e. 16 - k for each c_k = 1, k >= 1."""
        return tuple(sorted(LENGTH - k for k in range(1, LENGTH + 1) if self.mask >> k & 1))

    def __str__(self) -> str:
        terms = []
        for k in range(self.degree + 1):
            if self.mask >> k & 1:
                terms.append("1" if k == 0 else "x" if k == 1 else f"x^{k}")
        return " + ".join(terms)


DEFAULT_POLY = FeedbackPolynomial()


@dataclass(frozen=True)
class LfsrState:
    cells: tuple[int, ...]
    clock_count: int = 0
    poly: FeedbackPolynomial = field(default=DEFAULT_POLY, repr=False)

    def __post_init__(self):
        if len(self.cells) != LENGTH or any(c not in (0, 1) for c in self.cells):
            raise ValueError(f"LFSR state needs exactly {LENGTH} cells of 0/1")

    @classmethod
    def from_word(cls, word: int, poly: FeedbackPolynomial = DEFAULT_POLY) -> "LfsrState":
        """Load ``cells[k] = bit k of word`` with no zero-seed remap."""
        return cls(tuple((word >> k) & 1 for k in range(LENGTH)), 0, poly)

    @property
    def word(self) -> int:
        return sum(c << k for k, c in enumerate(self.cells))


def lfsr_new(seed: int, poly: FeedbackPolynomial = DEFAULT_POLY) -> LfsrState:
    """Seed the register from a 16-bit word; seed 0 is remapped to 0x0001."""
    seed &= 0xFFFF
    if seed == 0:
        seed = ZERO_SEED_REMAP
    return LfsrState.from_word(seed, poly)


def lfsr_clock(state: LfsrState) -> tuple[int, LfsrState]:
    cells = state.cells
    out = cells[0]
    fb = 0
    for t in state.poly.taps:
        fb ^= cells[t]
    return out, LfsrState(cells[1:] + (fb,), state.clock_count + 1, state.poly)


def step_word(word: int, taps: tuple[int, ...] = DEFAULT_POLY.taps) -> int:
    """One clock on a packed state word; the emitted bit is ``word & 1``."""
    fb = 0
    for t in taps:
        fb ^= word >> t
    return (word >> 1) | ((fb & 1) << (LENGTH - 1))


def lfsr_run(seed: int, n: int, *, remap_zero: bool = True,
             poly: FeedbackPolynomial = DEFAULT_POLY) -> list[int]:
    if n < 0:
        raise ValueError("n must be non-negative")
    word = seed & 0xFFFF
    if remap_zero and word == 0:
        word = ZERO_SEED_REMAP
    taps = poly.taps
    out = []
    for _ in range(n):
        out.append(word & 1)
        word = step_word(word, taps)
    return out


# -- GF(2)[x] arithmetic on int bitmasks ------------------------------------

def _polymulmod(a: int, b: int, mod: int) -> int:
    deg = mod.bit_length() - 1
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a >> deg & 1:
            a ^= mod
    return r


def _polypowmod(base: int, e: int, mod: int) -> int:
    result = 1
    while e:
        if e & 1:
            result = _polymulmod(result, base, mod)
        base = _polymulmod(base, base, mod)
        e >>= 1
    return result


def poly_is_primitive(poly: FeedbackPolynomial | int) -> bool:
    """True iff x has multiplicative order 2^16 - 1 modulo ``poly``."""
    mask = poly.mask if isinstance(poly, FeedbackPolynomial) else poly
    if mask.bit_length() - 1 != LENGTH:
        raise ValueError(f"only degree-{LENGTH} polynomials are supported")
    if not mask & 1:
        return False
    x = 0b10
    if _polypowmod(x, PERIOD, mask) != 1:
        return False
    return all(_polypowmod(x, PERIOD // q, mask) != 1 for q in _PERIOD_FACTORS)


# -- whole-cycle tables -------------------------------------------------------

@lru_cache(maxsize=None)
def state_cycle() -> np.ndarray:
    """The 65535 packed states visited from 0x0001, in clock order.

    Every nonzero seed sits somewhere on this single cycle, so any run of the
    register is a rotation of it.
    """
    states = np.empty(PERIOD, dtype=np.int64)
    word = ZERO_SEED_REMAP
    taps = DEFAULT_POLY.taps
    for t in range(PERIOD):
        states[t] = word
        word = step_word(word, taps)
    if word != ZERO_SEED_REMAP:
        raise RuntimeError("feedback polynomial is not maximal length")
    states.flags.writeable = False
    return states


@lru_cache(maxsize=None)
def state_position() -> np.ndarray:
    """``position[word]`` = clock index of ``word`` in :func:`state_cycle`.

    Entry 0 follows the zero-seed remap and points at 0x0001.
    """
    pos = np.empty(1 << LENGTH, dtype=np.int64)
    pos[state_cycle()] = np.arange(PERIOD)
    pos[0] = pos[ZERO_SEED_REMAP]
    pos.flags.writeable = False
    return pos
