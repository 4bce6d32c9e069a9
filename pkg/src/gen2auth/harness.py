"""Scenario runner: honest sessions, adversaries on the reader-tag radio link,
and keystore persistence.

Every scenario takes a run seed; all Query values, nonces and credentials
are drawn from it, so a run is reproducible from the seed alone.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import protocol as P
from .randtest import frequency_test

RUN_SEED_ENV = "GEN2_RUN_SEED"
MAX_RESTARTS = 8

Message = P.Query | P.TagResponse | P.Nonce3Msg


def resolve_run_seed(seed: int | None = None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(RUN_SEED_ENV)
    if env:
        return int(env, 16)
    return random.SystemRandom().getrandbits(32)


# -- channel ------------------------------------------------------------------

@dataclass
class LogEntry:
    sender: str
    receiver: str
    action: str          # deliver | drop | modify | inject | observe
    actor: str           # "honest" or "adversary"
    wire: bytes

    def to_json(self) -> dict:
        return {"sender": self.sender, "receiver": self.receiver, "action": self.action,
                "actor": self.actor, "wire": self.wire.hex()}


# An adversary hook sees each message in flight and returns what gets
# delivered: the same object, a different message, or None to drop it.
Adversary = Callable[[str, str, Message], Message | None]


class Channel:
    """The insecure radio link between reader and tag."""

    def __init__(self, adversary: Adversary | None = None):
        self.adversary = adversary
        self.log: list[LogEntry] = []
        self.observed: list[Message] = []

    def send(self, sender: str, receiver: str, msg: Message) -> Message | None:
        wire = P.encode(msg)
        self.observed.append(msg)
        if self.adversary is None:
            self.log.append(LogEntry(sender, receiver, "deliver", "honest", wire))
            return P.decode(wire)[0]
        out = self.adversary(sender, receiver, msg)
        if out is None:
            self.log.append(LogEntry(sender, receiver, "drop", "adversary", wire))
            return None
        if out == msg:
            self.log.append(LogEntry(sender, receiver, "deliver", "honest", wire))
        else:
            self.log.append(LogEntry(sender, receiver, "modify", "adversary", P.encode(out)))
        return P.decode(P.encode(out))[0]

    def inject(self, sender: str, receiver: str, msg: Message) -> Message:
        wire = P.encode(msg)
        self.log.append(LogEntry(sender, receiver, "inject", "adversary", wire))
        return P.decode(wire)[0]

    def wire_bytes(self) -> bytes:
        return b"".join(e.wire for e in self.log if e.action != "drop")


@dataclass
class ScenarioOutcome:
    name: str
    run_seed: int
    passed: bool
    verdicts: dict = field(default_factory=dict)
    detections: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    channel: Channel | None = field(default=None, repr=False)

    def to_json(self, transcript: bool = False) -> dict:
        d = {"scenario": self.name, "run_seed": f"{self.run_seed:08x}", "pass": self.passed,
             "verdicts": self.verdicts, "detections": self.detections, "metrics": self.metrics}
        if transcript and self.channel is not None:
            d["transcript"] = [e.to_json() for e in self.channel.log]
        return d


# -- one authentication ---------------------------------------------------------

@dataclass
class AuthResult:
    verdict: P.Verdict
    tag_result: P.Accept | P.Reject | None
    query: P.Query
    response: P.TagResponse | None
    restarts: int = 0


def authenticate(reader_entropy: P.Entropy, tag: P.TagState, ks: P.ServerKeystore,
                 channel: Channel, reader_log: list | None = None) -> AuthResult:
    """One pass of steps 1-5.  The reader only ever sees messages and verdicts."""
    q = P.reader_begin(reader_entropy)
    q_at_tag = channel.send("reader", "tag", q)
    if q_at_tag is None:
        return AuthResult(P.NoMatch(), None, q, None)
    resp = P.tag_respond(tag, q_at_tag)
    resp_at_reader = channel.send("tag", "reader", resp)
    if resp_at_reader is None:
        return AuthResult(P.NoMatch(), None, q, resp)
    verdict = P.server_verify(ks, q, resp_at_reader)
    if reader_log is not None:
        reader_log.append(verdict)
    if not isinstance(verdict, P.Unique):
        return AuthResult(verdict, None, q, resp)
    m = channel.send("reader", "tag", P.Nonce3Msg(verdict.nonce3, resp_at_reader.n))
    if m is None:
        return AuthResult(verdict, None, q, resp)
    return AuthResult(verdict, P.tag_finalize(tag, m), q, resp)


def authenticate_with_restarts(reader_entropy, tag, ks, channel, reader_log=None,
                               max_restarts: int = MAX_RESTARTS) -> AuthResult:
    """Repeat from step 1 while the server reports an ambiguous match."""
    for attempt in range(max_restarts + 1):
        res = authenticate(reader_entropy, tag, ks, channel, reader_log)
        if not isinstance(res.verdict, P.Ambiguous):
            res.restarts = attempt
            return res
    res.restarts = max_restarts
    return res


def random_credentials(rng: random.Random, ks: P.ServerKeystore | None = None) -> P.TagCredentials:
    while True:
        a, b = rng.getrandbits(16), rng.getrandbits(16)
        if a == b:
            continue
        if ks is not None and frozenset((a, b)) in ks._pairs:
            continue
        return P.TagCredentials(a, b, 0)


def _population(rng: random.Random, tags: int, keystore_size: int, n: int):
    ks = P.ServerKeystore()
    states = {}
    for i in range(max(tags, keystore_size)):
        label = f"tag{i:05d}"
        cred = random_credentials(rng, ks)
        ks.register(label, cred)
        if i < tags:
            states[label] = P.TagState(cred, n, P.Entropy(rng.getrandbits(32)))
    return ks, states


# -- scenarios ----------------------------------------------------------------

def run_honest_session(tags: int = 1, rounds: int = 1, run_seed: int | None = None, *,
                       keystore_size: int = 0, n: int = P.DEFAULT_N,
                       keystream_bits: int = 1024, record: bool = True) -> ScenarioOutcome:
    """Full 5-step runs for every tag and round, checking keys and credential sync.

    ``keystore_size`` pads the server with extra registered entries so the
    step-3 scan has realistic cost.
    """
    if tags < 1 or rounds < 1:
        raise ValueError("tags and rounds must be >= 1")
    seed = resolve_run_seed(run_seed)
    rng = random.Random(seed)
    ks, states = _population(rng, tags, keystore_size, n)
    reader = P.Entropy(rng.getrandbits(32))
    channel = Channel() if record else _NullChannel()
    successes = keys_equal = desync = rejects = restarts = failures = 0
    t0 = time.perf_counter()
    for _ in range(rounds):
        for label, tag in states.items():
            res = authenticate_with_restarts(reader, tag, ks, channel)
            restarts += res.restarts
            if isinstance(res.tag_result, P.Reject):
                rejects += 1
            if not (isinstance(res.verdict, P.Unique) and isinstance(res.tag_result, P.Accept)):
                failures += 1
                continue
            successes += 1
            same_key = res.verdict.session_key == res.tag_result.session_key
            if same_key and keystream_bits:
                same_key = np.array_equal(P.session_keystream(res.verdict.session_key, keystream_bits),
                                          P.session_keystream(res.tag_result.session_key, keystream_bits))
            keys_equal += same_key
            if ks.entries[label] != tag.credentials:
                desync += 1
    elapsed = time.perf_counter() - t0
    total = tags * rounds
    return ScenarioOutcome(
        "honest", seed,
        passed=successes == total and keys_equal == total and desync == 0 and rejects == 0,
        verdicts={"unique": successes, "failed": failures, "ambiguous_restarts": restarts},
        detections={"false_rejects": rejects},
        metrics={"authentications": total, "keys_equal": keys_equal, "desync": desync,
                 "keystore_size": len(ks), "seconds": elapsed,
                 "auth_per_sec": total / elapsed if elapsed > 0 else math.inf},
        channel=channel if record else None,
    )


class _NullChannel(Channel):
    """Pass-through link that still round-trips the wire encoding but keeps no log."""

    def send(self, sender, receiver, msg):
        return P.decode(P.encode(msg))[0]


def run_replay_attack(trials: int = 1, run_seed: int | None = None, *,
                      n: int = P.DEFAULT_N) -> ScenarioOutcome:
    """Record an honest exchange, then replay its TagResponse.

    Variants per trial:
      after_new_query  -- old response injected against a fresh reader Query
      after_full_pair  -- old (Query, response) sent straight to the server
      before_finalize  -- server rotated at step 4, step 5 dropped, then replay
      frozen_control   -- old pair against a keystore snapshot taken before the
                          run; must match, showing rotation is the defence
    """
    seed = resolve_run_seed(run_seed)
    rng = random.Random(seed)
    tally = {"after_new_query": 0, "after_full_pair": 0, "before_finalize": 0, "frozen_control": 0}
    channel = Channel()
    for _ in range(trials):
        ks, states = _population(rng, 1, 1, n)
        (label, tag), = states.items()
        reader = P.Entropy(rng.getrandbits(32))
        frozen = P.ServerKeystore(ks.snapshot())

        honest = authenticate(reader, tag, ks, channel)
        if not isinstance(honest.tag_result, P.Accept):
            raise RuntimeError("honest reference run failed")
        recorded_q, recorded = honest.query, honest.response

        q2 = P.reader_begin(reader)
        channel.send("reader", "tag", q2)
        forged = channel.inject("tag", "reader", recorded)
        tally["after_new_query"] += isinstance(P.server_verify(ks, q2, forged), P.NoMatch)
        tally["after_full_pair"] += isinstance(P.server_verify(ks, recorded_q, recorded), P.NoMatch)
        tally["frozen_control"] += isinstance(P.server_verify(frozen, recorded_q, recorded), P.Unique)

        # second setup: server rotates, the Nonce3 message never reaches the tag
        ks2, states2 = _population(rng, 1, 1, n)
        (_, tag2), = states2.items()
        reader2 = P.Entropy(rng.getrandbits(32))
        dropper = Channel(lambda s, r, m: None if isinstance(m, P.Nonce3Msg) else m)
        cut = authenticate(reader2, tag2, ks2, dropper)
        channel.log.extend(dropper.log)
        if not isinstance(cut.verdict, P.Unique):
            raise RuntimeError("honest reference run failed")
        tally["before_finalize"] += isinstance(P.server_verify(ks2, cut.query, cut.response), P.NoMatch)

    ok = all(v == trials for v in tally.values())
    return ScenarioOutcome(
        "replay", seed, passed=ok,
        verdicts={k: f"{v}/{trials}" for k, v in tally.items()},
        detections={"server_flagged_replay": tally["after_new_query"] + tally["after_full_pair"]
                    + tally["before_finalize"]},
        metrics={"trials": trials, **tally},
        channel=channel,
    )


MITM_TAMPERS = ("flip_response_bit", "flip_nonce3_bit", "forge_response")


def _flip(value: int, n: int, rng: random.Random) -> int:
    return value ^ (1 << rng.randrange(n))


def run_mitm_attack(tamper: str, trials: int = 1000, run_seed: int | None = None, *,
                    tags: int = 1, n: int = P.DEFAULT_N) -> ScenarioOutcome:
    if tamper not in MITM_TAMPERS:
        raise ValueError(f"tamper must be one of {MITM_TAMPERS}")
    seed = resolve_run_seed(run_seed)
    rng = random.Random(seed)
    no_match = unique = tag_rejects = tag_accepts = updated = unique_then_reject = 0
    expected = trials * tags * 2.0 ** -n
    budget = max(3, math.ceil(5 * expected))
    log: list[LogEntry] = []
    for _ in range(trials):
        ks, states = _population(rng, tags, tags, n)
        label, tag = next(iter(states.items()))
        before = tag.credentials
        reader = P.Entropy(rng.getrandbits(32))

        if tamper == "forge_response":
            channel = Channel()
            q = P.reader_begin(reader)
            channel.send("reader", "tag", q)
            fake = channel.inject("tag", "reader",
                                  P.TagResponse(rng.getrandbits(n), rng.getrandbits(16), n))
            verdict = P.server_verify(ks, q, fake)
            result = None
        else:
            target = P.TagResponse if tamper == "flip_response_bit" else P.Nonce3Msg

            def adversary(sender, receiver, msg, target=target):
                if not isinstance(msg, target):
                    return msg
                if target is P.TagResponse:
                    return P.TagResponse(_flip(msg.response, msg.n, rng), msg.nonce1, msg.n)
                return P.Nonce3Msg(_flip(msg.value, msg.n, rng), msg.n)

            channel = Channel(adversary)
            res = authenticate(reader, tag, ks, channel)
            verdict, result = res.verdict, res.tag_result
        log.extend(channel.log)

        if isinstance(verdict, P.NoMatch):
            no_match += 1
        elif isinstance(verdict, P.Unique):
            unique += 1
            if isinstance(result, P.Reject):
                unique_then_reject += 1
        tag_rejects += isinstance(result, P.Reject)
        tag_accepts += isinstance(result, P.Accept)
        updated += tag.credentials != before

    if tamper == "flip_response_bit":
        ok = no_match + unique_then_reject == trials and unique <= budget
    elif tamper == "flip_nonce3_bit":
        ok = tag_rejects == trials and updated == 0
    else:
        ok = unique <= budget
    channel = Channel()
    channel.log = log
    return ScenarioOutcome(
        f"mitm:{tamper}", seed, passed=ok,
        verdicts={"no_match": no_match, "unique": unique, "tag_reject": tag_rejects,
                  "tag_accept": tag_accepts},
        detections={"server_detected": no_match, "tag_detected": tag_rejects},
        metrics={"trials": trials, "registered_tags": tags,
                 "accidental_unique": None if tamper == "flip_nonce3_bit" else unique,
                 "unique_budget": budget, "expected_accidental": expected,
                 "tag_credentials_updated": updated},
        channel=channel,
    )


def pairwise_collisions(values) -> int:
    _, counts = np.unique(np.asarray(values, dtype=np.uint64), return_counts=True)
    return int(np.sum(counts * (counts - 1) // 2))


def run_tracking_probe(epochs: int = 1000, run_seed: int | None = None, *,
                       n: int = P.DEFAULT_N, fixed_query: int | None = None,
                       frozen: bool = False) -> ScenarioOutcome:
    """An eavesdropper collects one tag's step-2 responses over many epochs.

    By default the reader picks a fresh random Query each time.  ``fixed_query``
    replays one Query every epoch, as an active probe would; ``frozen`` skips
    authentication so credentials never rotate (control case).
    """
    if epochs < 2:
        raise ValueError("epochs must be >= 2")
    seed = resolve_run_seed(run_seed)
    rng = random.Random(seed)
    ks, states = _population(rng, 1, 1, n)
    (label, tag), = states.items()
    reader = P.Entropy(rng.getrandbits(32))
    if fixed_query is not None:
        reader = _FixedQuery(fixed_query, reader)
    channel = Channel()
    responses = []
    failed = 0
    for _ in range(epochs):
        if frozen:
            q = P.reader_begin(reader)
            channel.send("reader", "tag", q)
            resp = channel.send("tag", "reader", P.tag_respond(tag, q))
        else:
            res = authenticate_with_restarts(reader, tag, ks, channel)
            resp = res.response
            failed += not isinstance(res.tag_result, P.Accept)
        responses.append(resp.response)
    pairs = epochs * (epochs - 1) // 2
    expected = pairs * 2.0 ** -n
    budget = math.floor(5 * expected)
    collisions = pairwise_collisions(responses)
    bits = [(r >> i) & 1 for r in responses for i in range(n)]
    freq = frequency_test(bits) if len(bits) >= 100 else None
    distinct = len(set(responses))
    passed = collisions <= budget and failed == 0
    if frozen:
        passed = distinct == 1
    return ScenarioOutcome(
        "tracking" + (":frozen" if frozen else "") + (":fixed-query" if fixed_query is not None else ""),
        seed, passed=passed,
        verdicts={"failed_authentications": failed},
        detections={"linkable": collisions > budget},
        metrics={"epochs": epochs, "pairs": pairs, "collisions": collisions,
                 "expected_collisions": expected, "collision_budget": budget,
                 "distinct_responses": distinct,
                 "frequency_statistic": freq.statistic if freq else None,
                 "frequency_pass": freq.passed if freq else None,
                 "final_epoch": tag.credentials.epoch},
        channel=channel,
    )


class _FixedQuery(P.Entropy):
    def __init__(self, q: int, inner: P.Entropy):
        self.seed = inner.seed
        self._q = q & 0xFFFF
        self._inner = inner

    def word16(self) -> int:
        return self._q

    def bits(self, n: int) -> int:
        return self._inner.bits(n)


# -- keystore persistence -------------------------------------------------------

def keystore_to_json(ks: P.ServerKeystore) -> list[dict]:
    return [{"label": label, "id": f"{c.id:04x}", "ssk": f"{c.ssk:04x}", "epoch": c.epoch}
            for label, c in ks.entries.items()]


def keystore_save(ks: P.ServerKeystore, path) -> None:
    with open(path, "w") as fh:
        json.dump(keystore_to_json(ks), fh, indent=2)
        fh.write("\n")


def _hex16(value, field_name: str, label) -> int:
    if not isinstance(value, str) or len(value) != 4:
        raise P.MalformedKeystore(f"entry {label!r}: {field_name} must be 4 hex digits")
    try:
        return int(value, 16)
    except ValueError:
        raise P.MalformedKeystore(f"entry {label!r}: {field_name} is not hex") from None


def keystore_from_json(doc) -> P.ServerKeystore:
    if not isinstance(doc, list):
        raise P.MalformedKeystore("keystore must be a JSON array")
    ks = P.ServerKeystore()
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or set(entry) != {"label", "id", "ssk", "epoch"}:
            raise P.MalformedKeystore(f"entry {i}: expected keys label, id, ssk, epoch")
        label = entry["label"]
        if not isinstance(label, str):
            raise P.MalformedKeystore(f"entry {i}: label must be a string")
        epoch = entry["epoch"]
        if not isinstance(epoch, int) or isinstance(epoch, bool) or epoch < 0:
            raise P.MalformedKeystore(f"entry {label!r}: epoch must be a non-negative integer")
        ks.register(label, P.TagCredentials(_hex16(entry["id"], "id", label),
                                             _hex16(entry["ssk"], "ssk", label), epoch))
    return ks


def keystore_load(path) -> P.ServerKeystore:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise P.MalformedKeystore(f"{path}: {e}") from None
    return keystore_from_json(doc)

