"""Statistical battery: the five basic tests, serial correlation,
Berlekamp-Massey linear complexity, period measurement and the three EPC
Gen2 generator criteria.

The five basic tests follow the classic chi-square / normal forms:

* frequency  -- X1 = (n0 - n1)^2 / n, 1 degree of freedom
* serial     -- difference of overlapping-pattern statistics psi^2_m - psi^2_{m-1},
                2^(m-1) degrees of freedom (m = 2 is the two-bit serial test)
* poker      -- X3 = 2^m / k * sum(n_i^2) - k over k disjoint m-bit blocks
* runs       -- chi-square on runs of length 1..4 of both symbols (short),
                plus a chi-square on the aggregated counts of runs >= 5 (long)
* autocorrelation -- X5(d) = 2 (A(d) - (n-d)/2) / sqrt(n-d) for d = 1..8, combined
                with a Bonferroni threshold so the family keeps level alpha
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import prng

KINDS = ("frequency", "serial", "poker", "runs", "autocorrelation")

# Upper critical values of chi-square, keyed by alpha then degrees of freedom.
CHI2_CRITICAL = {
    0.1: {1: 2.7055, 2: 4.6052, 3: 6.2514, 4: 7.7794, 6: 10.6446, 7: 12.017,
          8: 13.3616, 15: 22.3071, 31: 41.4217, 255: 284.3359},
    0.05: {1: 3.8415, 2: 5.9915, 3: 7.8147, 4: 9.4877, 6: 12.5916, 7: 14.0671,
           8: 15.5073, 15: 24.9958, 31: 44.9853, 255: 293.2478},
    0.01: {1: 6.6349, 2: 9.2103, 3: 11.3449, 4: 13.2767, 6: 16.8119, 7: 18.4753,
           8: 20.0902, 15: 30.5779, 31: 52.1914, 255: 310.4574},
}
# Two-sided standard normal critical values: z_{1-alpha/2} for a single
# shift and z_{1-alpha/16} for the 8-shift family.
NORMAL_CRITICAL = {
    0.1: {1: 1.6449, 8: 2.4977},
    0.05: {1: 1.96, 8: 2.7344},
    0.01: {1: 2.5758, 8: 3.2272},
}

SHORT_RUN_MAX = 4
AUTOCORR_SHIFTS = tuple(range(1, 9))


class SequenceTooShort(ValueError):
    def __init__(self, kind: str, minimum: int, got: int):
        super().__init__(f"{kind} test needs at least {minimum} bits, got {got}")
        self.minimum = minimum


class InsufficientSample(ValueError):
    pass


@dataclass
class TestResult:
    __test__ = False  # keep pytest from collecting this

    kind: str
    params: dict
    statistic: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.statistic = float(self.statistic)
        self.passed = bool(self.passed)

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _chi2(alpha: float, df: int) -> float:
    try:
        return CHI2_CRITICAL[alpha][df]
    except KeyError:
        raise ValueError(f"no embedded chi-square critical value for alpha={alpha}, df={df}") from None


def _as_bits(seq) -> np.ndarray:
    a = np.asarray(seq, dtype=np.int64).ravel()
    if a.size and (a.min() < 0 or a.max() > 1):
        raise ValueError("sequence must contain only 0/1")
    return a


def _require(kind: str, n: int, minimum: int):
    if n < minimum:
        raise SequenceTooShort(kind, minimum, n)


def pattern_counts(bits: np.ndarray, m: int, *, overlapping: bool = True,
                   cyclic: bool = False) -> np.ndarray:
    """Counts of each m-bit pattern (first bit most significant)."""
    bits = _as_bits(bits)
    if cyclic:
        bits = np.concatenate((bits, bits[: m - 1]))
    if overlapping:
        count = bits.size - m + 1
        codes = np.zeros(max(count, 0), dtype=np.int64)
        for j in range(m):
            codes = (codes << 1) | bits[j:j + count]
    else:
        k = bits.size // m
        blocks = bits[: k * m].reshape(k, m)
        codes = (blocks << np.arange(m - 1, -1, -1)).sum(axis=1)
    return np.bincount(codes, minlength=1 << m)


def frequency_test(bits, alpha: float = 0.05) -> TestResult:
    bits = _as_bits(bits)
    n = bits.size
    _require("frequency", n, 100)
    n1 = int(bits.sum())
    n0 = n - n1
    x1 = (n0 - n1) ** 2 / n
    thr = _chi2(alpha, 1)
    return TestResult("frequency", {"alpha": alpha}, x1, thr, x1 <= thr, {"n0": n0, "n1": n1})


def _psi2(bits: np.ndarray, m: int) -> float:
    if m == 0:
        return 0.0
    counts = pattern_counts(bits, m)
    total = bits.size - m + 1
    return (1 << m) / total * float(np.sum(counts.astype(np.float64) ** 2)) - total


def serial_test(bits, m: int = 2, alpha: float = 0.05) -> TestResult:
    bits = _as_bits(bits)
    _require("serial", bits.size, 100 * (1 << m))
    stat = _psi2(bits, m) - _psi2(bits, m - 1)
    df = 1 << (m - 1)
    thr = _chi2(alpha, df)
    return TestResult("serial", {"m": m, "alpha": alpha}, stat, thr, stat <= thr,
                      {"df": df, "counts": pattern_counts(bits, m).tolist()})


def poker_test(bits, m: int = 4, alpha: float = 0.05) -> TestResult:
    bits = _as_bits(bits)
    _require("poker", bits.size, 100 * (1 << m))
    counts = pattern_counts(bits, m, overlapping=False)
    k = bits.size // m
    x3 = (1 << m) / k * float(np.sum(counts.astype(np.float64) ** 2)) - k
    df = (1 << m) - 1
    thr = _chi2(alpha, df)
    return TestResult("poker", {"m": m, "alpha": alpha}, x3, thr, x3 <= thr,
                      {"df": df, "blocks": k, "counts": counts.tolist()})


def run_lengths(bits) -> tuple[np.ndarray, np.ndarray]:
    """(lengths, symbols) of the maximal runs of ``bits``, in order."""
    bits = _as_bits(bits)
    if bits.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    starts = np.concatenate(([0], np.flatnonzero(np.diff(bits)) + 1))
    ends = np.concatenate((starts[1:], [bits.size]))
    return ends - starts, bits[starts]


def expected_runs(n: int, length: int) -> float:
    """Expected number of runs of exactly ``length`` of one symbol in n random bits."""
    return (n - length + 3) / 2 ** (length + 2)


def runs_test(bits, alpha: float = 0.05) -> TestResult:
    bits = _as_bits(bits)
    n = bits.size
    _require("runs", n, 100 * (1 << SHORT_RUN_MAX))
    lengths, symbols = run_lengths(bits)
    short = 0.0
    observed = {}
    for sym, name in ((1, "blocks"), (0, "gaps")):
        ls = lengths[symbols == sym]
        counts = np.bincount(np.minimum(ls, SHORT_RUN_MAX + 1), minlength=SHORT_RUN_MAX + 2)
        observed[name] = counts[1:].tolist()
        for i in range(1, SHORT_RUN_MAX + 1):
            e = expected_runs(n, i)
            short += (counts[i] - e) ** 2 / e
    e_long = sum(expected_runs(n, i) for i in range(SHORT_RUN_MAX + 1, min(n, 80) + 1))
    long_stat = float(sum((obs[SHORT_RUN_MAX] - e_long) ** 2 / e_long for obs in observed.values()))
    thr_short = _chi2(alpha, 2 * SHORT_RUN_MAX - 2)
    thr_long = _chi2(alpha, 2)
    return TestResult(
        "runs", {"alpha": alpha, "short_max": SHORT_RUN_MAX}, short, thr_short, short <= thr_short,
        {"observed": observed, "long_statistic": long_stat, "long_threshold": thr_long,
         "long_pass": bool(long_stat <= thr_long), "longest_run": int(lengths.max())},
    )


def autocorrelation_test(bits, shifts: Sequence[int] = AUTOCORR_SHIFTS,
                         alpha: float = 0.05) -> TestResult:
    bits = _as_bits(bits)
    shifts = tuple(shifts)
    n = bits.size
    _require("autocorrelation", n, 100 + max(shifts))
    try:
        thr = NORMAL_CRITICAL[alpha][len(shifts)]
    except KeyError:
        raise ValueError(f"no embedded normal critical value for alpha={alpha}, "
                         f"{len(shifts)} shifts") from None
    z = {}
    for d in shifts:
        a = int(np.count_nonzero(bits[:-d] != bits[d:]))
        z[d] = 2 * (a - (n - d) / 2) / math.sqrt(n - d)
    worst = max(abs(v) for v in z.values())
    return TestResult("autocorrelation", {"shifts": list(shifts), "alpha": alpha}, worst, thr,
                      worst <= thr, {"z": {str(d): v for d, v in z.items()}})


_TESTS: dict[str, Callable[..., TestResult]] = {
    "frequency": frequency_test,
    "serial": serial_test,
    "poker": poker_test,
    "runs": runs_test,
    "autocorrelation": autocorrelation_test,
}


def golomb_test(seq, kind: str, params: dict | None = None, alpha: float = 0.05) -> TestResult:
    if kind not in _TESTS:
        raise ValueError(f"unknown test {kind!r}; expected one of {KINDS}")
    return _TESTS[kind](seq, alpha=alpha, **(params or {}))


class SerialCorrelation(NamedTuple):
    coefficient: float
    degenerate: bool


def serial_correlation(seq) -> SerialCorrelation:
    """Lag-1 Pearson correlation of the series with itself shifted by one."""
    x = np.asarray(seq, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("serial correlation needs at least 2 values")
    a, b = x[:-1], x[1:]
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0:
        return SerialCorrelation(0.0, True)
    return SerialCorrelation(float(np.dot(da, db)) / denom, False)


def pooled_serial_correlation(rows) -> SerialCorrelation:
    """Lag-1 correlation over (x_t, x_{t+1}) pairs taken within each row."""
    rows = np.asarray(rows, dtype=np.float64)
    a, b = rows[:, :-1].ravel(), rows[:, 1:].ravel()
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0:
        return SerialCorrelation(0.0, True)
    return SerialCorrelation(float(np.dot(da, db)) / denom, False)


def berlekamp_massey(seq) -> tuple[int, int]:
    """Shortest LFSR generating ``seq``.

    Returns ``(L, C)`` with C the connection polynomial as a bitmask (bit k is
    the coefficient of x^k, bit 0 always set), so that
    s_t = sum_{k=1..L} c_k s_{t-k} for all t >= L.
    """
    c, b = 1, 1
    lc, shift = 0, 1
    window = 0  # bit i holds s_{t-i}
    for t, bit in enumerate(_as_bits(seq).tolist()):
        window = (window << 1) | bit
        if (c & window).bit_count() & 1:
            if 2 * lc <= t:
                c, b = c ^ (b << shift), c
                lc = t + 1 - lc
                shift = 1
            else:
                c ^= b << shift
                shift += 1
        else:
            shift += 1
    return lc, c


def lfsr_regenerate(connection: int, length: int, initial: Sequence[int], n: int) -> list[int]:
    """Run the recurrence ``connection`` forward from its first ``length`` bits."""
    out = [int(v) for v in initial[:length]]
    taps = [k for k in range(1, length + 1) if connection >> k & 1]
    while len(out) < n:
        t = len(out)
        out.append(sum(out[t - k] for k in taps) & 1)
    return out[:n]


def measure_period(seq) -> int | None:
    """Smallest p with seq[i] == seq[i+p] throughout, if at least 2p bits were seen."""
    s = _as_bits(seq).tolist()
    n = len(s)
    if n == 0:
        return None
    # prefix function: smallest period = n - longest proper border
    pi = [0] * n
    k = 0
    for i in range(1, n):
        while k and s[i] != s[k]:
            k = pi[k - 1]
        if s[i] == s[k]:
            k += 1
        pi[i] = k
    p = n - pi[-1]
    return p if 2 * p <= n else None


# -- EPC Gen2 criteria --------------------------------------------------------

CRITERION1_LOW = 0.8 / 2 ** 16
CRITERION1_HIGH = 1.25 / 2 ** 16
MIN_CRITERION1_WORDS = 1 << 16

Keystream = Callable[[int, int], np.ndarray]


def _words(source: Keystream, seed: int, count: int) -> np.ndarray:
    bits = np.asarray(source(seed, count * 16), dtype=np.int64).reshape(count, 16)
    return (bits << np.arange(16)).sum(axis=1)


def _distinct_seeds(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.choice(np.arange(1, 1 << 16), size=count, replace=False)


@dataclass
class EpcReport:
    criterion1: dict
    criterion2: dict
    criterion3: dict

    @property
    def all_pass(self) -> bool:
        return all(c["pass"] for c in (self.criterion1, self.criterion2, self.criterion3))

    def to_json(self) -> dict:
        return {"criterion1": self.criterion1, "criterion2": self.criterion2,
                "criterion3": self.criterion3, "all_pass": self.all_pass}


def criterion1(words: np.ndarray) -> dict:
    words = np.asarray(words, dtype=np.int64).ravel()
    if words.size < MIN_CRITERION1_WORDS:
        raise InsufficientSample(f"criterion 1 needs >= {MIN_CRITERION1_WORDS} words, got {words.size}")
    freq = np.bincount(words, minlength=1 << 16) / words.size
    outside = (freq < CRITERION1_LOW) | (freq > CRITERION1_HIGH)
    return {
        "pass": bool(not outside.any()),
        "words": int(words.size),
        "interval": [CRITERION1_LOW, CRITERION1_HIGH],
        "min_frequency": float(freq.min()),
        "max_frequency": float(freq.max()),
        "values_outside": int(outside.sum()),
        "values_never_seen": int(np.count_nonzero(freq == 0)),
        "histogram": freq,
    }


def criterion2(source: Keystream, seeds: np.ndarray, prefix_bits: int = 64) -> dict:
    seeds = np.asarray(seeds)
    if seeds.size < 2:
        raise InsufficientSample("criterion 2 needs at least 2 seeds")
    if np.unique(seeds).size != seeds.size:
        raise ValueError("criterion 2 seeds must be distinct")
    prefixes = {}
    colliding_seeds = 0
    for s in seeds.tolist():
        key = np.packbits(np.asarray(source(s, prefix_bits), dtype=np.uint8)).tobytes()
        if key in prefixes:
            colliding_seeds += 1
        prefixes.setdefault(key, []).append(s)
    pairs = sum(len(v) * (len(v) - 1) // 2 for v in prefixes.values())
    return {"pass": colliding_seeds == 0, "seeds": int(seeds.size), "prefix_bits": prefix_bits,
            "distinct_prefixes": len(prefixes), "colliding_seeds": colliding_seeds,
            "colliding_pairs": pairs}


def epc_criteria_report(seed_sample_size: int = 1024, words_per_seed: int = 1024, *,
                        collision_seeds: int = 10_000, prefix_bits: int = 64,
                        correlation_bound: float = 0.01,
                        rng: np.random.Generator | None = None,
                        source: Keystream = prng.prng_keystream) -> EpcReport:
    """Check the three EPC Gen2 generator criteria on a sample of seeds.

    Criterion 3 (unpredictability 10 ms after transmission) has no software
    analogue; lag-1 serial correlation of bits and of 16-bit words stands in.
    """
    rng = rng or np.random.default_rng()
    if seed_sample_size < 1 or words_per_seed < 2:
        raise InsufficientSample("need at least 1 seed and 2 words per seed")
    if not 2 <= collision_seeds <= (1 << 16) - 1:
        raise InsufficientSample("criterion 2 needs between 2 and 65535 distinct seeds")
    seeds = _distinct_seeds(rng, seed_sample_size) if seed_sample_size < (1 << 16) \
        else rng.integers(1, 1 << 16, seed_sample_size)
    words = np.stack([_words(source, int(s), words_per_seed) for s in seeds])
    c1 = criterion1(words)
    c1["seeds"] = int(seed_sample_size)

    c2 = criterion2(source, _distinct_seeds(rng, collision_seeds), prefix_bits)

    bit_rows = np.stack([np.asarray(source(int(s), words_per_seed * 16)) for s in seeds])
    word_corr = pooled_serial_correlation(words)
    bit_corr = pooled_serial_correlation(bit_rows)
    c3 = {"pass": bool(abs(word_corr.coefficient) < correlation_bound),
          "bound": correlation_bound,
          "word_lag1": word_corr.coefficient, "bit_lag1": bit_corr.coefficient}
    return EpcReport(c1, c2, c3)


# -- battery over seeds -------------------------------------------------------

BATTERY_COLUMNS = ("frequency", "serial", "poker", "runs_short", "runs_long", "autocorrelation")


@dataclass
class BatteryReport:
    seed_count: int
    bits_per_seed: int
    alpha: float
    percentages: dict
    autocorrelation_shift_pass: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def run_battery(bits, alpha: float = 0.05) -> dict[str, TestResult]:
    return {kind: golomb_test(bits, kind, alpha=alpha) for kind in KINDS}


def battery_over_seeds(seeds: Sequence[int], bits_per_seed: int, alpha: float = 0.05,
                       source: Keystream = prng.prng_keystream) -> BatteryReport:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ValueError("need at least one seed")
    passes = dict.fromkeys(BATTERY_COLUMNS, 0)
    shift_pass = dict.fromkeys(AUTOCORR_SHIFTS, 0)
    z1 = NORMAL_CRITICAL[alpha][1]
    for s in seeds:
        res = run_battery(source(s, bits_per_seed), alpha)
        passes["frequency"] += bool(res["frequency"].passed)
        passes["serial"] += bool(res["serial"].passed)
        passes["poker"] += bool(res["poker"].passed)
        passes["runs_short"] += bool(res["runs"].passed)
        passes["runs_long"] += bool(res["runs"].details["long_pass"])
        passes["autocorrelation"] += bool(res["autocorrelation"].passed)
        for d in AUTOCORR_SHIFTS:
            shift_pass[d] += bool(abs(res["autocorrelation"].details["z"][str(d)]) <= z1)
    n = len(seeds)
    return BatteryReport(
        seed_count=n, bits_per_seed=bits_per_seed, alpha=alpha,
        percentages={k: 100.0 * v / n for k, v in passes.items()},
        autocorrelation_shift_pass={str(d): 100.0 * v / n for d, v in shift_pass.items()},
    )
