import json

import numpy as np
import pytest

from gen2auth.cli import main, read_bits
from gen2auth.crc16 import crc16_append
from gen2auth.prng import prng_keystream


@pytest.mark.parametrize("fmt", ["bits01", "hex", "raw"])
def test_gen_formats_round_trip(tmp_path, fmt):
    out = tmp_path / f"s.{fmt}"
    assert main(["gen", "--seed", "beef", "--bits", "37", "--out", str(out), "--format", fmt]) == 0
    bits = read_bits(out)
    want = prng_keystream(0xBEEF, 37)
    if fmt == "hex":
        # hex carries whole bytes; the tail is zero padding
        assert np.array_equal(bits[:37], want) and not bits[37:].any()
    else:
        assert np.array_equal(bits, want)
    if fmt == "raw":
        assert json.loads((tmp_path / "s.raw.json").read_text()) == {"bits": 37, "seed": "beef"}


def test_gen_bad_seed():
    with pytest.raises(SystemExit):
        main(["gen", "--seed", "10000", "--bits", "8", "--out", "x"])


def test_analyze_seed(tmp_path, capsys):
    js = tmp_path / "a.json"
    rc = main(["analyze", "--seed", "0001", "--bits", "20000", "--tests", "freq,serial,bm,period",
               "--json", str(js), "--plots", str(tmp_path)])
    assert rc == 0
    doc = json.loads(js.read_text())
    assert set(doc["tests"]) == {"frequency", "serial", "linear_complexity", "period"}
    assert doc["seed"] == "0001"
    assert "serial corr." in capsys.readouterr().out


def test_analyze_file_and_plot(tmp_path):
    f = tmp_path / "bits.txt"
    main(["gen", "--seed", "0002", "--bits", "5000", "--out", str(f)])
    rc = main(["analyze", "--in", str(f), "--tests", "autocorr", "--plots", str(tmp_path)])
    assert rc in (0, 1)
    assert (tmp_path / "autocorrelation.png").stat().st_size > 0


def test_analyze_unknown_test(capsys):
    assert main(["analyze", "--seed", "1", "--tests", "spectral"]) == 2


def test_analyze_too_short_reports_error(capsys):
    assert main(["analyze", "--seed", "1", "--bits", "50", "--tests", "freq"]) == 1
    assert "error" in capsys.readouterr().out


def test_analyze_battery(tmp_path):
    js = tmp_path / "b.json"
    assert main(["analyze", "--seeds", "4", "--bits", "20000", "--run-seed", "7",
                 "--json", str(js), "--plots", str(tmp_path)]) == 0
    doc = json.loads(js.read_text())
    assert doc["seed_count"] == 4
    assert (tmp_path / "battery.png").exists()


def test_epc_check_fails_with_report(tmp_path, capsys):
    js = tmp_path / "e.json"
    rc = main(["epc-check", "--seeds", "64", "--words", "1024", "--collision-seeds", "500",
               "--run-seed", "1", "--json", str(js), "--plots", str(tmp_path)])
    assert rc == 1
    doc = json.loads(js.read_text())
    assert not doc["criterion1"]["pass"]
    assert "histogram" not in doc["criterion1"]
    assert (tmp_path / "word_frequencies.png").exists()
    assert "criterion 2" in capsys.readouterr().out


def test_filter_analyze(tmp_path, capsys):
    js = tmp_path / "f.json"
    assert main(["filter-analyze", "--json", str(js), "--plots", str(tmp_path)]) == 0
    doc = json.loads(js.read_text())
    assert list(doc) == ["weight", "degree", "nonlinearity", "ci_order", "resiliency", "parseval_ok"]
    assert doc["degree"] == 7
    assert "note:" in capsys.readouterr().err
    assert (tmp_path / "walsh_spectrum.png").exists()


def test_crc(tmp_path, capsys):
    f = tmp_path / "m"
    f.write_bytes(b"123456789")
    assert main(["crc", "--in", str(f)]) == 0
    assert capsys.readouterr().out.strip() == "D64E"
    f.write_bytes(crc16_append(b"abc"))
    assert main(["crc", "--in", str(f), "--verify"]) == 0
    f.write_bytes(b"xbc" + crc16_append(b"abc")[3:])
    assert main(["crc", "--in", str(f), "--verify"]) == 1
    f.write_bytes(b"a")
    assert main(["crc", "--in", str(f), "--verify"]) == 2


def test_auth_demo(tmp_path):
    js, wire = tmp_path / "auth.json", tmp_path / "auth.bin"
    assert main(["auth", "demo", "--tags", "3", "--rounds", "2", "--seed", "abc",
                 "--json", str(js), "--wire", str(wire), "--transcript"]) == 0
    doc = json.loads(js.read_text())
    assert doc["pass"] and doc["run_seed"] == "00000abc"
    assert len(doc["transcript"]) >= 18
    assert wire.stat().st_size > 0


def test_attack_replay_and_tracking(tmp_path):
    assert main(["attack", "replay", "--trials", "3", "--seed", "1"]) == 0
    assert main(["attack", "tracking", "--trials", "200", "--seed", "1",
                 "--json", str(tmp_path / "t.json")]) == 0


def test_attack_mitm_all(tmp_path):
    js = tmp_path / "m.json"
    assert main(["attack", "mitm", "--trials", "50", "--seed", "2", "--json", str(js)]) == 0
    assert (tmp_path / "m-forge_response.json").exists()


def test_env_run_seed(monkeypatch, capsys):
    monkeypatch.setenv("GEN2_RUN_SEED", "1f")
    assert main(["auth", "demo"]) == 0
    assert '"run_seed": "0000001f"' in capsys.readouterr().out
