"""Command line front end: ``gen2auth <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import boolfn, crc16, harness, plots, prng, randtest


def _hex16(s: str) -> int:
    v = int(s, 16)
    if not 0 <= v <= 0xFFFF:
        raise argparse.ArgumentTypeError(f"{s} is not a 16-bit hex value")
    return v


def _hex32(s: str) -> int:
    return int(s, 16)


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super().default(o)


def _write_json(path, doc):
    if path:
        Path(path).write_text(json.dumps(doc, indent=2, cls=_Encoder) + "\n")


def _pack(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    bits = prng.prng_keystream(args.seed, args.bits)
    out = Path(args.out)
    if args.format == "bits01":
        out.write_text("".join(map(str, bits.tolist())) + "\n")
    elif args.format == "hex":
        out.write_text(_pack(bits).hex() + "\n")
    else:
        out.write_bytes(_pack(bits))
        sidecar = out.with_name(out.name + ".json")
        sidecar.write_text(json.dumps({"bits": args.bits, "seed": f"{args.seed:04x}"}) + "\n")
    return 0


def read_bits(path) -> np.ndarray:
    """Load a bit file written by ``gen`` in any of its formats."""
    path = Path(path)
    sidecar = path.with_name(path.name + ".json")
    if sidecar.exists():
        n = json.loads(sidecar.read_text())["bits"]
        raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
        return np.unpackbits(raw, bitorder="little")[:n]
    text = path.read_text().strip()
    if set(text) <= {"0", "1"}:
        return np.frombuffer(text.encode(), dtype=np.uint8) - ord("0")
    raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
    return np.unpackbits(raw, bitorder="little")


# -- analyze / epc-check / filter-analyze ---------------------------------------

_TEST_ALIASES = {"freq": "frequency", "serial": "serial", "poker": "poker", "runs": "runs",
                 "autocorr": "autocorrelation"}


def cmd_analyze(args) -> int:
    wanted = [t.strip() for t in args.tests.split(",") if t.strip()]
    unknown = set(wanted) - set(_TEST_ALIASES) - {"bm", "period"}
    if unknown:
        print(f"unknown tests: {', '.join(sorted(unknown))}", file=sys.stderr)
        return 2
    if args.seeds or args.all_seeds:
        return _battery(args)
    bits = read_bits(args.infile) if args.infile else prng.prng_keystream(args.seed, args.bits)
    report = {"bits": int(bits.size), "alpha": args.alpha, "tests": {}}
    if args.seed is not None and not args.infile:
        report["seed"] = f"{args.seed:04x}"
    ok = True
    for t in wanted:
        if t in _TEST_ALIASES:
            try:
                r = randtest.golomb_test(bits, _TEST_ALIASES[t], alpha=args.alpha)
            except randtest.SequenceTooShort as e:
                print(f"{t:<16} error: {e}")
                ok = False
                continue
            report["tests"][r.kind] = r.to_json()
            ok &= r.passed
            print(f"{r.kind:<16} stat={r.statistic:12.4f} thr={r.threshold:9.4f} "
                  f"{'PASS' if r.passed else 'FAIL'}")
            if r.kind == "runs":
                d = r.details
                print(f"{'runs (long)':<16} stat={d['long_statistic']:12.4f} "
                      f"thr={d['long_threshold']:9.4f} {'PASS' if d['long_pass'] else 'FAIL'}")
            if r.kind == "autocorrelation" and args.plots:
                plots.autocorrelation_shifts(r.details["z"], r.threshold,
                                             Path(args.plots) / "autocorrelation.png")
        elif t == "bm":
            lc, poly = randtest.berlekamp_massey(bits)
            report["tests"]["linear_complexity"] = {"lc": lc, "ratio": lc / max(bits.size, 1),
                                                    "connection_polynomial": hex(poly)}
            print(f"{'linear complexity':<16} {lc} ({lc / max(bits.size, 1):.4f} of length)")
        elif t == "period":
            p = randtest.measure_period(bits)
            report["tests"]["period"] = {"period": p}
            print(f"{'period':<16} {p if p is not None else 'not observed'}")
    corr = randtest.serial_correlation(bits)
    report["serial_correlation"] = corr._asdict()
    print(f"{'serial corr.':<16} {corr.coefficient:+.6f}")
    _write_json(args.json, report)
    return 0 if ok else 1


def _battery(args) -> int:
    if args.all_seeds:
        seeds = np.arange(1, 1 << 16)
    else:
        rng = np.random.default_rng(harness.resolve_run_seed(args.run_seed))
        seeds = rng.choice(np.arange(1, 1 << 16), size=args.seeds, replace=False)
    rep = randtest.battery_over_seeds(seeds, args.bits, args.alpha)
    for k, v in rep.percentages.items():
        ref = plots.REFERENCE_PASS_RATES.get(k)
        print(f"{k:<16} {v:7.2f}%   published {ref:6.2f}%")
    if args.plots:
        plots.battery_pass_rates(rep.percentages, Path(args.plots) / "battery.png")
    _write_json(args.json, rep.to_json())
    return 0


def cmd_epc_check(args) -> int:
    rng = np.random.default_rng(harness.resolve_run_seed(args.run_seed))
    rep = randtest.epc_criteria_report(args.seeds, args.words, collision_seeds=args.collision_seeds,
                                       correlation_bound=args.bound, rng=rng)
    doc = rep.to_json()
    hist = doc["criterion1"].pop("histogram")
    c1, c2, c3 = doc["criterion1"], doc["criterion2"], doc["criterion3"]
    print(f"criterion 1  {'PASS' if c1['pass'] else 'FAIL'}  frequency range "
          f"[{c1['min_frequency'] * 2**16:.3f}, {c1['max_frequency'] * 2**16:.3f}]/2^16, "
          f"{c1['values_outside']} values outside [0.8, 1.25]/2^16")
    print(f"criterion 2  {'PASS' if c2['pass'] else 'FAIL'}  {c2['colliding_seeds']} of "
          f"{c2['seeds']} seeds repeat an earlier {c2['prefix_bits']}-bit prefix")
    print(f"criterion 3  {'PASS' if c3['pass'] else 'FAIL'}  word lag-1 {c3['word_lag1']:+.5f}, "
          f"bit lag-1 {c3['bit_lag1']:+.5f} (bound {c3['bound']})")
    if args.plots:
        plots.word_histogram(hist, Path(args.plots) / "word_frequencies.png")
    _write_json(args.json, doc)
    return 0 if rep.all_pass else 1


def cmd_filter_analyze(args) -> int:
    profile = boolfn.analyze_filter()
    doc = profile.to_json()
    print(json.dumps(doc, indent=2))
    for note in boolfn.claim_discrepancies(profile):
        print(f"note: {note}", file=sys.stderr)
    if args.plots:
        plots.walsh_histogram(boolfn.walsh_spectrum(boolfn.filter_table()),
                              Path(args.plots) / "walsh_spectrum.png")
    _write_json(args.json, doc)
    return 0


# -- crc ----------------------------------------------------------------------

def cmd_crc(args) -> int:
    data = Path(args.infile).read_bytes()
    if args.verify:
        try:
            ok = crc16.crc16_verify(data)
        except crc16.MalformedInput as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        print("OK" if ok else "MISMATCH")
        return 0 if ok else 1
    print(f"{crc16.crc16_compute(data):04X}")
    return 0


# -- auth / attack ------------------------------------------------------------------

def _finish(outcome: harness.ScenarioOutcome, args) -> int:
    doc = outcome.to_json(transcript=getattr(args, "transcript", False))
    print(json.dumps({k: v for k, v in doc.items() if k != "transcript"}, indent=2, cls=_Encoder))
    _write_json(args.json, doc)
    if getattr(args, "wire", None) and outcome.channel is not None:
        Path(args.wire).write_bytes(outcome.channel.wire_bytes())
    return 0 if outcome.passed else 1


def cmd_auth(args) -> int:
    out = harness.run_honest_session(args.tags, args.rounds, args.seed,
                                     keystore_size=args.keystore_size)
    return _finish(out, args)


def cmd_attack(args) -> int:
    if args.kind == "replay":
        return _finish(harness.run_replay_attack(args.trials, args.seed), args)
    if args.kind == "tracking":
        return _finish(harness.run_tracking_probe(max(args.trials, 2), args.seed,
                                                  fixed_query=args.fixed_query), args)
    tampers = [args.tamper] if args.tamper else list(harness.MITM_TAMPERS)
    seed = harness.resolve_run_seed(args.seed)
    rc = 0
    for t in tampers:
        out = harness.run_mitm_attack(t, args.trials, seed)
        doc = out.to_json()
        print(json.dumps(doc, indent=2, cls=_Encoder))
        rc |= 0 if out.passed else 1
        if args.json:
            path = Path(args.json)
            _write_json(path if len(tampers) == 1 else path.with_name(f"{path.stem}-{t}{path.suffix}"),
                        doc)
    return rc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gen2auth", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write generator output")
    g.add_argument("--seed", type=_hex16, required=True)
    g.add_argument("--bits", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--format", choices=("bits01", "hex", "raw"), default="bits01")
    g.set_defaults(func=cmd_gen)

    a = sub.add_parser("analyze", help="run the statistical tests")
    src = a.add_mutually_exclusive_group()
    src.add_argument("--in", dest="infile")
    src.add_argument("--seed", type=_hex16)
    a.add_argument("--bits", type=int, default=65535, help="bits per seed when generating")
    a.add_argument("--tests", default="freq,serial,poker,runs,autocorr,bm,period")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--seeds", type=int, default=0, help="battery over this many random seeds")
    a.add_argument("--all-seeds", action="store_true", help="battery over all 65535 seeds (slow)")
    a.add_argument("--run-seed", type=_hex32)
    a.add_argument("--json")
    a.add_argument("--plots", help="directory for figures")
    a.set_defaults(func=cmd_analyze)

    e = sub.add_parser("epc-check", help="EPC Gen2 generator criteria")
    e.add_argument("--seeds", type=int, default=1024)
    e.add_argument("--words", type=int, default=1024)
    e.add_argument("--collision-seeds", type=int, default=10_000)
    e.add_argument("--bound", type=float, default=0.01)
    e.add_argument("--run-seed", type=_hex32)
    e.add_argument("--json")
    e.add_argument("--plots")
    e.set_defaults(func=cmd_epc_check)

    f = sub.add_parser("filter-analyze", help="exhaustive filter profile")
    f.add_argument("--json")
    f.add_argument("--plots")
    f.set_defaults(func=cmd_filter_analyze)

    c = sub.add_parser("crc", help="EPC Gen2 CRC-16 of a file")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--verify", action="store_true", help="check the trailing 2 CRC bytes")
    c.set_defaults(func=cmd_crc)

    au = sub.add_parser("auth", help="honest authentication runs")
    ausub = au.add_subparsers(dest="mode", required=True)
    demo = ausub.add_parser("demo")
    demo.add_argument("--tags", type=int, default=1)
    demo.add_argument("--rounds", type=int, default=1)
    demo.add_argument("--keystore-size", type=int, default=0)
    demo.add_argument("--seed", type=_hex32)
    demo.add_argument("--json")
    demo.add_argument("--wire", help="write the channel records to this file")
    demo.add_argument("--transcript", action="store_true", help="include the log in --json")
    demo.set_defaults(func=cmd_auth)

    at = sub.add_parser("attack", help="adversary scenarios")
    at.add_argument("kind", choices=("replay", "mitm", "tracking"))
    at.add_argument("--trials", type=int, default=1000)
    at.add_argument("--tamper", choices=harness.MITM_TAMPERS)
    at.add_argument("--fixed-query", type=_hex16, help="tracking: reuse one Query every epoch")
    at.add_argument("--seed", type=_hex32)
    at.add_argument("--json")
    at.add_argument("--wire")
    at.add_argument("--transcript", action="store_true")
    at.set_defaults(func=cmd_attack)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "command", None) == "analyze" and args.infile is None and args.seed is None \
            and not (args.seeds or args.all_seeds):
        args.seed = 0x0001
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
