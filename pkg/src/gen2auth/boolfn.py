"""The 16-variable degree-7 filter and exhaustive Boolean-function analysis."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

NVARS = 16
SIZE = 1 << NVARS


def _run(start: int, width: int) -> tuple[int, ...]:
    return tuple(range(start, start + width))


# Linear term x6, then for order i = 2..7 the floor(16 / i) products of
# successive disjoint variable blocks.
FILTER_MONOMIALS: tuple[tuple[int, ...], ...] = (
    (6,),
    *(_run(2 * i, 2) for i in range(8)),
    *(_run(3 * i, 3) for i in range(5)),
    *(_run(4 * i, 4) for i in range(4)),
    *(_run(5 * i, 5) for i in range(3)),
    *(_run(6 * i, 6) for i in range(2)),
    *(_run(7 * i, 7) for i in range(2)),
)


@dataclass(frozen=True)
class FilterFunction:
    monomials: tuple[tuple[int, ...], ...] = FILTER_MONOMIALS

    def __post_init__(self):
        for m in self.monomials:
            if not m or any(not 0 <= v < NVARS for v in m):
                raise ValueError(f"bad monomial {m}")

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(sum(1 << v for v in m) for m in self.monomials)

    @property
    def degree(self) -> int:
        return max((len(m) for m in self.monomials), default=0)


FILTER = FilterFunction()
_FILTER_MASKS = FILTER.masks


@dataclass(frozen=True)
class FilterProfile:
    weight: int
    degree: int
    nonlinearity: int
    ci_order: int
    resiliency: int
    parseval_ok: bool

    def to_json(self) -> dict:
        return asdict(self)


def filter_eval(x: int, f: FilterFunction = FILTER) -> int:
    """XOR of the monomials; variable x_k is bit k of ``x``."""
    masks = _FILTER_MASKS if f is FILTER else f.masks
    out = 0
    for m in masks:
        if x & m == m:
            out ^= 1
    return out


def truth_table(f: FilterFunction = FILTER) -> np.ndarray:
    if f is FILTER:
        return filter_table()
    return _table(f.masks)


def _table(masks) -> np.ndarray:
    idx = np.arange(SIZE, dtype=np.int64)
    table = np.zeros(SIZE, dtype=np.uint8)
    for m in masks:
        table ^= ((idx & m) == m).astype(np.uint8)
    return table


@lru_cache(maxsize=None)
def filter_table() -> np.ndarray:
    table = _table(_FILTER_MASKS)
    table.flags.writeable = False
    return table


def walsh_spectrum(table: np.ndarray) -> np.ndarray:
    """W(a) = sum_x (-1)^(f(x) + a.x) by the fast Walsh-Hadamard transform."""
    table = np.asarray(table)
    n = table.size
    if n == 0 or n & (n - 1):
        raise ValueError(f"truth table length must be a power of two, got {n}")
    w = 1 - 2 * table.astype(np.int64)
    h = 1
    while h < n:
        w = w.reshape(-1, 2, h)
        a, b = w[:, 0, :], w[:, 1, :]
        w = np.stack((a + b, a - b), axis=1).reshape(n)
        h <<= 1
    return w


def anf(table: np.ndarray) -> np.ndarray:
    """Moebius transform; coefficient at index u is the monomial prod_{k in u} x_k."""
    table = np.asarray(table)
    n = table.size
    if n == 0 or n & (n - 1):
        raise ValueError(f"truth table length must be a power of two, got {n}")
    a = table.astype(np.uint8).copy()
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        a[:, 1, :] ^= a[:, 0, :]
        a = a.reshape(n)
        h <<= 1
    return a


def anf_monomials(table: np.ndarray) -> list[tuple[int, ...]]:
    coeffs = anf(table)
    return [tuple(k for k in range(NVARS) if u >> k & 1) for u in np.flatnonzero(coeffs)]


def _popcounts(n: int) -> np.ndarray:
    idx = np.arange(n, dtype=np.int64)
    pc = np.zeros(n, dtype=np.int64)
    while idx.any():
        pc += idx & 1
        idx >>= 1
    return pc


def nonlinearity(spectrum: np.ndarray) -> int:
    return int(spectrum.size // 2 - np.abs(spectrum).max() // 2)


def correlation_immunity(spectrum: np.ndarray) -> int:
    """Largest m with W(a) = 0 for every mask of Hamming weight 1..m."""
    pc = _popcounts(spectrum.size)
    nv = spectrum.size.bit_length() - 1
    m = 0
    for wt in range(1, nv + 1):
        if np.any(spectrum[pc == wt] != 0):
            break
        m = wt
    return m


def algebraic_degree(table: np.ndarray) -> int:
    coeffs = anf(table)
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return 0
    return int(_popcounts(coeffs.size)[nz].max())


def analyze_filter(f: FilterFunction = FILTER) -> FilterProfile:
    table = truth_table(f)
    spec = walsh_spectrum(table)
    weight = int(table.sum())
    ci = correlation_immunity(spec)
    balanced = spec[0] == 0
    parseval = int(np.sum(spec * spec)) == SIZE * SIZE
    return FilterProfile(
        weight=weight,
        degree=algebraic_degree(table),
        nonlinearity=nonlinearity(spec),
        ci_order=ci,
        # balanced is 0-resilient; unbalanced functions get -1
        resiliency=ci if balanced else -1,
        parseval_ok=bool(parseval),
    )


def claim_discrepancies(profile: FilterProfile) -> list[str]:
    """Published claims about the filter that the exhaustive measurement contradicts."""
    notes = []
    if profile.weight != SIZE // 2:
        notes.append(f"claimed balanced (weight {SIZE // 2}), measured weight {profile.weight}")
    if profile.ci_order < 1:
        notes.append(f"claimed first-order correlation immune, measured CI order {profile.ci_order}")
    if profile.degree != 7:
        notes.append(f"claimed algebraic degree 7, measured {profile.degree}")
    return notes


def restrict(table: np.ndarray, fixed_mask: int, fixed_values: int) -> np.ndarray:
    """Sub-function over the free variables, free variables packed in index order."""
    free = [k for k in range(NVARS) if not fixed_mask >> k & 1]
    sub = np.arange(1 << len(free), dtype=np.int64)
    idx = np.full(sub.shape, fixed_values & fixed_mask, dtype=np.int64)
    for j, k in enumerate(free):
        idx |= ((sub >> j) & 1) << k
    return np.asarray(table)[idx]


def sampling_resistance(table: np.ndarray, trials: int, fixed: int = 8,
                        rng: np.random.Generator | None = None) -> dict:
    """Fix ``fixed`` random variables to random constants ``trials`` times.

    Counts restrictions that collapse to a constant or to an affine function
    of the remaining variables.
    """
    rng = rng or np.random.default_rng()
    constant = affine = 0
    for _ in range(trials):
        chosen = rng.choice(NVARS, size=fixed, replace=False)
        mask = int(sum(1 << int(k) for k in chosen))
        values = int(rng.integers(0, SIZE))
        sub = restrict(table, mask, values)
        if sub.min() == sub.max():
            constant += 1
        elif algebraic_degree(sub) <= 1:
            affine += 1
    return {"trials": trials, "fixed": fixed, "constant": constant, "affine": affine}
