import json

import numpy as np
import pytest

from onebitlin.cli import main
from onebitlin.harness import ExperimentConfig, make_pair
from onebitlin.io import load_linearizer, read_csv, read_signal, write_signal
from onebitlin.linearizers import LutLinearizer, apply_linearizer, build_lut

SMALL = ["--M", "3", "--L", "1024", "--n-sweep", "2,4", "--spectrum-n", "4"]


@pytest.fixture
def signals(tmp_path):
    p = make_pair(ExperimentConfig(L=2048), "multitone", 0)
    write_signal(tmp_path / "x.csv", p.x)
    write_signal(tmp_path / "v.csv", p.v)
    return tmp_path


def last_json(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.mark.parametrize("method", ["proposed", "relu", "modulus", "hammerstein"])
def test_design_and_apply(signals, method, capsys):
    lin_path = signals / "lin.txt"
    code = main(["design", "--method", method, "--N", "4", "--reference", str(signals / "x.csv"),
                 "--distorted", str(signals / "v.csv"), "--out", str(lin_path)])
    assert code == 0
    assert "mse_after" in capsys.readouterr().out
    lin = load_linearizer(lin_path)
    assert main(["apply", "--linearizer", str(lin_path), "--input", str(signals / "v.csv"),
                 "--output", str(signals / "y.csv")]) == 0
    v = read_signal(signals / "v.csv")
    y = read_signal(signals / "y.csv")
    ref = build_lut(lin) if method == "proposed" else lin
    assert y.tobytes() == apply_linearizer(ref, v).tobytes()


def test_apply_branch_matches_lut(signals):
    lin_path = signals / "lin.txt"
    main(["design", "--N", "8", "--reference", str(signals / "x.csv"), "--distorted",
          str(signals / "v.csv"), "--out", str(lin_path), "--report", str(signals / "r.txt")])
    assert "lambda" in (signals / "r.txt").read_text()
    for flag in ("--lut", "--branch"):
        main(["apply", "--linearizer", str(lin_path), "--input", str(signals / "v.csv"),
              "--output", str(signals / f"y{flag}.csv"), flag])
    assert read_signal(signals / "y--lut.csv").tobytes() == read_signal(signals / "y--branch.csv").tobytes()


def test_example1_example2_verify(tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["example1", *SMALL, "--output-dir", str(out)]) == 0
    assert "uncorrected mean SNDR" in capsys.readouterr().out
    _, rows = read_csv(out / "sndr_vs_N.csv")
    assert len(rows) == 8
    assert main(["example2", *SMALL, "--output-dir", str(out)]) == 0
    assert "bandpass" in capsys.readouterr().out
    assert main(["verify-lut", *SMALL, "--output-dir", str(out)]) == 0
    assert "max discrepancy 0.0" in capsys.readouterr().out


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"M = 2\nL = 1024\nN_sweep = 2\noutput_dir = {tmp_path / 'fromfile'}\n")
    assert main(["example1", "--config", str(cfg), "--M", "3"]) == 0
    _, rows = read_csv(tmp_path / "fromfile" / "sndr_per_signal_uncorrected.csv")
    assert len(rows) == 3


def test_spectrum(signals):
    assert main(["spectrum", "--input", str(signals / "x.csv"), "--output", str(signals / "s.csv")]) == 0
    header, rows = read_csv(signals / "s.csv")
    assert header == ["omega_over_pi", "power_db"] and len(rows) == 1025
    assert max(float(r[1]) for r in rows) == 0.0


def test_spectrum_empty_warns(tmp_path, capsys):
    write_signal(tmp_path / "z.csv", np.zeros(64))
    assert main(["spectrum", "--input", str(tmp_path / "z.csv"), "--output", str(tmp_path / "s.csv")]) == 0
    assert "empty spectrum" in capsys.readouterr().err


def test_missing_input_json_error(tmp_path, capsys):
    code = main(["apply", "--linearizer", str(tmp_path / "nope.txt"), "--input", str(tmp_path / "v.csv"),
                 "--output", str(tmp_path / "y.csv")])
    assert code == 2
    err = last_json(capsys.readouterr().err)
    assert set(err) == {"error", "message"}


def test_runtime_error_json(tmp_path, capsys):
    code = main(["example2", "--output-dir", str(tmp_path / "empty"), "--M", "2"])
    assert code == 1
    err = last_json(capsys.readouterr().err)
    assert err["error"] == "HarnessError" and "not found" in err["message"]


def test_bad_config_value(tmp_path, capsys):
    assert main(["example1", "--distortion", "abc"]) == 1
    assert last_json(capsys.readouterr().err)["error"] == "HarnessError"


def test_lut_file_applies(signals, tmp_path):
    from onebitlin.io import save_linearizer
    from onebitlin.linearizers import BranchLinearizer, biases_proposed
    lut = build_lut(BranchLinearizer(0.0, 1.0, biases_proposed(3), (0.01, 0.02, -0.01), "onebit"))
    assert isinstance(lut, LutLinearizer)
    save_linearizer(tmp_path / "lut.txt", lut)
    assert main(["apply", "--linearizer", str(tmp_path / "lut.txt"), "--input", str(signals / "v.csv"),
                 "--output", str(tmp_path / "y.csv")]) == 0


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out
