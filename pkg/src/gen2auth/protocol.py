"""Tag / reader / back-end server mutual authentication with session-key setup.

Message flow for one authentication (n-bit responses, n = 16 by default)::

    reader -> tag     Query q                    (16 bits)
    tag    -> reader  TagResponse(r, nonce1)     r = R(id, ssk, q)
    reader -> server  (q, r, nonce1)             secure link
    server -> reader  Unique(K, nonce3) | NoMatch | Ambiguous
    reader -> tag     Nonce3Msg(nonce3)          nonce3 = R(id, ssk, nonce1)

where R(a, b, x) XORs the last n bits of the (16 + n)-bit keystreams seeded
with a ^ x and b ^ x, and K = id ^ ssk.  Both sides rotate (id, ssk) through
:func:`prng.update_credential` on success; the server on its Unique verdict,
the tag once it has checked nonce3.

n-bit values are carried as ints whose bit i is the i-th bit of the field.
R is symmetric in (id, ssk), so the keystore refuses entries that are
swapped copies of each other as well as entries with id == ssk.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

import numpy as np

from . import prng

DEFAULT_N = 16
MAX_N = 64


class ProtocolError(Exception):
    pass


class ProtocolOrderError(ProtocolError):
    pass


class KeystoreError(ValueError):
    pass


class DegenerateCredentials(KeystoreError):
    pass


class DuplicateLabel(KeystoreError):
    pass


class DuplicatePair(KeystoreError):
    pass


class MalformedKeystore(KeystoreError):
    pass


def _check_n(n: int):
    if not 1 <= n <= MAX_N:
        raise ValueError(f"response length n must be in 1..{MAX_N}, got {n}")


def response_table(n: int = DEFAULT_N) -> np.ndarray:
    """Per seed, keystream bits 16 .. 16+n-1 packed LSB-first (uint64)."""
    _check_n(n)
    return prng.window_table(prng.WORD_BITS, n)


def compute_response(id_: int, ssk: int, x: int, n: int = DEFAULT_N) -> int:
    table = response_table(n)
    return int(table[(id_ ^ x) & 0xFFFF] ^ table[(ssk ^ x) & 0xFFFF])


# -- messages -----------------------------------------------------------------
# No message type carries id or ssk.

@dataclass(frozen=True)
class Query:
    value: int


@dataclass(frozen=True)
class TagResponse:
    response: int
    nonce1: int
    n: int = DEFAULT_N


@dataclass(frozen=True)
class Nonce3Msg:
    value: int
    n: int = DEFAULT_N


@dataclass(frozen=True)
class NoMatch:
    pass


@dataclass(frozen=True)
class Unique:
    session_key: int
    nonce3: int


@dataclass(frozen=True)
class Ambiguous:
    pass


Verdict = NoMatch | Unique | Ambiguous


@dataclass(frozen=True)
class Accept:
    session_key: int


@dataclass(frozen=True)
class Reject:
    pass


# -- wire format --------------------------------------------------------------
# record = u16 length of what follows | u8 type | payload, all big-endian.
# n-bit fields: u8 n, then the value's bits from bit n-1 down to bit 0,
# zero-padded at the end to a byte boundary.

MSG_QUERY, MSG_TAG_RESPONSE, MSG_NONCE3 = 1, 2, 3


def _pack_bits(value: int, n: int) -> bytes:
    nbytes = (n + 7) // 8
    return struct.pack(">B", n) + (value << (8 * nbytes - n)).to_bytes(nbytes, "big")


def _unpack_bits(buf: bytes, at: int) -> tuple[int, int, int]:
    n = buf[at]
    nbytes = (n + 7) // 8
    raw = int.from_bytes(buf[at + 1:at + 1 + nbytes], "big")
    return raw >> (8 * nbytes - n), n, at + 1 + nbytes


def encode(msg: Query | TagResponse | Nonce3Msg) -> bytes:
    if isinstance(msg, Query):
        body = struct.pack(">BH", MSG_QUERY, msg.value)
    elif isinstance(msg, TagResponse):
        body = struct.pack(">B", MSG_TAG_RESPONSE) + _pack_bits(msg.response, msg.n) \
            + struct.pack(">H", msg.nonce1)
    elif isinstance(msg, Nonce3Msg):
        body = struct.pack(">B", MSG_NONCE3) + _pack_bits(msg.value, msg.n)
    else:
        raise TypeError(f"no wire encoding for {type(msg).__name__}")
    return struct.pack(">H", len(body)) + body


def decode(buf: bytes) -> list[Query | TagResponse | Nonce3Msg]:
    out = []
    at = 0
    while at < len(buf):
        if at + 3 > len(buf):
            raise ProtocolError("truncated record header")
        (length,) = struct.unpack_from(">H", buf, at)
        end = at + 2 + length
        if end > len(buf):
            raise ProtocolError("truncated record")
        kind = buf[at + 2]
        p = at + 3
        if kind == MSG_QUERY:
            (q,) = struct.unpack_from(">H", buf, p)
            out.append(Query(q))
        elif kind == MSG_TAG_RESPONSE:
            value, n, p = _unpack_bits(buf, p)
            (nonce1,) = struct.unpack_from(">H", buf, p)
            out.append(TagResponse(value, nonce1, n))
        elif kind == MSG_NONCE3:
            value, n, p = _unpack_bits(buf, p)
            out.append(Nonce3Msg(value, n))
        else:
            raise ProtocolError(f"unknown record type {kind}")
        at = end
    return out


# -- entropy ------------------------------------------------------------------

class Entropy:
    """Seeded source for Query and nonce values."""

    def __init__(self, seed: int | None = None):
        self.seed = seed if seed is not None else random.SystemRandom().getrandbits(32)
        self._rng = random.Random(self.seed)

    def word16(self) -> int:
        return self._rng.getrandbits(16)

    def bits(self, n: int) -> int:
        return self._rng.getrandbits(n)


class CounterEntropy(Entropy):
    """Deterministic 0, 1, 2, ... for reproducible tests."""

    def __init__(self, start: int = 0):
        self.seed = start
        self._next = start

    def word16(self) -> int:
        v = self._next & 0xFFFF
        self._next += 1
        return v

    def bits(self, n: int) -> int:
        v = self._next & ((1 << n) - 1)
        self._next += 1
        return v


# -- parties ------------------------------------------------------------------

@dataclass(frozen=True)
class TagCredentials:
    id: int
    ssk: int
    epoch: int = 0

    @property
    def session_key(self) -> int:
        return self.id ^ self.ssk

    def rotated(self) -> "TagCredentials":
        return TagCredentials(prng.update_credential(self.id), prng.update_credential(self.ssk),
                              self.epoch + 1)


@dataclass(frozen=True)
class Pending:
    query: int
    nonce1: int
    expected_nonce3: int


@dataclass
class TagState:
    credentials: TagCredentials
    n: int = DEFAULT_N
    entropy: Entropy | None = None
    pending: Pending | None = None

    def __post_init__(self):
        _check_n(self.n)
        if self.entropy is None:
            self.entropy = Entropy()


class ServerKeystore:
    """label -> TagCredentials, with the pair invariants enforced on insert."""

    def __init__(self, entries: dict[str, TagCredentials] | None = None):
        self.entries: dict[str, TagCredentials] = {}
        self._pairs: dict[frozenset, str] = {}
        for label, cred in (entries or {}).items():
            self.register(label, cred)

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, ServerKeystore) and self.entries == other.entries

    @staticmethod
    def _pair(cred: TagCredentials) -> frozenset:
        return frozenset((cred.id, cred.ssk))

    def register(self, label: str, cred: TagCredentials):
        if label in self.entries:
            raise DuplicateLabel(f"label {label!r} already registered")
        if cred.id == cred.ssk:
            raise DegenerateCredentials(f"{label!r}: id == ssk gives an all-zero response and K = 0")
        pair = self._pair(cred)
        if pair in self._pairs:
            raise DuplicatePair(f"{label!r} shares the credential pair of {self._pairs[pair]!r}")
        self.entries[label] = cred
        self._pairs[pair] = label

    def _replace(self, label: str, cred: TagCredentials):
        old = self.entries[label]
        self._pairs.pop(self._pair(old), None)
        self.entries[label] = cred
        # a rotation landing on another entry's pair is not refused here;
        # the next scan simply reports Ambiguous for it
        self._pairs.setdefault(self._pair(cred), label)

    def snapshot(self) -> dict[str, TagCredentials]:
        return dict(self.entries)


def reader_begin(entropy: Entropy) -> Query:
    return Query(entropy.word16())


def tag_respond(t: TagState, q: Query) -> TagResponse:
    """Step 2.  Any earlier pending authentication is abandoned."""
    c = t.credentials
    nonce1 = t.entropy.word16()
    t.pending = Pending(q.value, nonce1, compute_response(c.id, c.ssk, nonce1, t.n))
    return TagResponse(compute_response(c.id, c.ssk, q.value, t.n), nonce1, t.n)


def server_verify(ks: ServerKeystore, q: Query, r: TagResponse) -> Verdict:
    """Steps 3-4: scan every stored pair for the received response."""
    if not ks.entries:
        return NoMatch()
    _check_n(r.n)
    labels = list(ks.entries)
    creds = list(ks.entries.values())
    ids = np.fromiter((c.id for c in creds), dtype=np.int64, count=len(creds))
    ssks = np.fromiter((c.ssk for c in creds), dtype=np.int64, count=len(creds))
    table = response_table(r.n)
    responses = table[ids ^ q.value] ^ table[ssks ^ q.value]
    hits = np.flatnonzero(responses == np.uint64(r.response))
    if hits.size == 0:
        return NoMatch()
    if hits.size > 1:
        return Ambiguous()
    label = labels[int(hits[0])]
    cred = creds[int(hits[0])]
    nonce3 = compute_response(cred.id, cred.ssk, r.nonce1, r.n)
    ks._replace(label, cred.rotated())
    return Unique(cred.session_key, nonce3)


def tag_finalize(t: TagState, m: Nonce3Msg) -> Accept | Reject:
    """Step 5 on the tag: strict equality with the locally computed nonce3."""
    if t.pending is None:
        raise ProtocolOrderError("tag has no pending authentication")
    pending, t.pending = t.pending, None
    if m.n != t.n or m.value != pending.expected_nonce3:
        return Reject()
    key = t.credentials.session_key
    t.credentials = t.credentials.rotated()
    return Accept(key)


def session_keystream(key: int, nbits: int) -> np.ndarray:
    return prng.prng_keystream(key, nbits)


def xor_crypt(key: int, data: bytes) -> bytes:
    """Encrypt or decrypt ``data`` with the session keystream, LSB-first per byte."""
    z = session_keystream(key, 8 * len(data)).reshape(-1, 8).astype(np.int64)
    pad = (z << np.arange(8)).sum(axis=1).astype(np.uint8)
    return (np.frombuffer(bytes(data), dtype=np.uint8) ^ pad).tobytes()
