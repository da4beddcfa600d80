import json
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from qmult import cli
from qmult.io import Table, format_real, read_results, to_csv, write_results


def run(argv, tmp_path, name="out.csv"):
    out = tmp_path / name
    code = cli.main([*argv, "--output", str(out)])
    return code, out


def test_parse_valid_config():
    cfg = cli.parse_args(["norms", "--seq", "tm", "--s", "2", "--L", "8", "--mode", "dp"])
    assert cfg.command == "norms" and str(cfg.seq) == "tm"
    assert cfg.params["L"] == [8] and cfg.params["r"] == [0, 0, 0, 0]
    assert cfg.format == "csv" and cfg.threads == 1


@pytest.mark.parametrize("argv,flag", [
    (["gelfond", "--seq", "gtm:tau=1.5"], "--seq"),
    (["patterns", "--q", "3", "--Q", "4", "--k", "2", "--residues", "0,1", "--N", "64"], "--Q"),
    (["norms", "--seq", "tm", "--s", "5", "--L", "4"], "--s"),
    (["norms", "--seq", "tm", "--s", "2", "--L", "4", "--r", "0,1"], "--r"),
    (["norms", "--seq", "tm", "--s", "2", "--L", "4", "--r", "0,0,0,3"], "--r"),
    (["norms", "--seq", "rudin-shapiro", "--s", "2", "--L", "4", "--mode", "dp"], "--seq"),
    (["patterns", "--q", "2", "--Q", "3", "--k", "2", "--residues", "0,1,2", "--N", "9"], "--k"),
    (["gamma", "--seq", "tm", "--R", "4", "--method", "fft"], "--method"),
    (["ergodic-demo", "--poly", "0,-1"], "--poly"),
])
def test_parse_errors_name_flag(argv, flag):
    with pytest.raises(cli.UsageError, match=flag):
        cli.parse_args(argv)


@pytest.mark.parametrize("argv", [["frobnicate"], ["norms", "--seq", "tm", "--s", "2", "--L", "4", "--bogus", "1"],
                                  ["norms", "--seq", "tm", "--s", "2", "--L", "4", "--thr", "2"]])
def test_unknown_rejected(argv):
    with pytest.raises(cli.UsageError):
        cli.parse_args(argv)


def test_patterns_coprime_accepted():
    cfg = cli.parse_args(["patterns", "--q", "2", "--Q", "4", "--k", "2", "--residues", "0,1", "--N", "64"])
    assert cfg.params["Q"] == 4


def test_int_list_ranges():
    assert cli.int_list("8..10,12") == [8, 9, 10, 12]


def test_norms_csv_columns_and_sidecar(tmp_path):
    code, out = run(["norms", "--seq", "tm", "--s", "2", "--L", "3,4"], tmp_path)
    assert code == 0
    t = read_results(out)
    assert t.columns[:6] == ["s", "L", "method", "value", "error_bound", "runtime_ms"]
    assert [r[1] for r in t.rows] == ["3", "4"]
    assert all(r[5] == "" for r in t.rows)
    meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
    assert meta["config"]["command"] == "norms" and meta["config"]["seq"] == "tm"
    assert len(meta["config_hash"]) == 64 and meta["runtime_ms"] >= 0
    assert "numpy" in meta["versions"]


def test_patterns_ladder_csv(tmp_path):
    code, out = run(["patterns", "--q", "2", "--Q", "3", "--residues", "0,1,2", "--N", "100"], tmp_path)
    assert code == 0
    t = read_results(out)
    assert t.columns[:3] == ["N", "count", "density"]
    assert t.rows[-1][0] == "100"


def test_timing_fills_runtime(tmp_path):
    code, out = run(["cesaro", "--seq", "tm", "--L", "3", "--timing"], tmp_path)
    assert code == 0 and float(read_results(out).rows[0][-1]) >= 0


def test_json_roundtrip_bit_exact(tmp_path):
    code, out = run(["gamma", "--seq", "random:q=3,levels=8", "--R", "20", "--method", "finite:N=5000"],
                    tmp_path, "g.json")
    assert code == 0
    t = read_results(out)
    from qmult import pseudorandom, seqcore
    cs = pseudorandom.correlations(seqcore.build("random:q=3,levels=8,seed=0"), 20, "finite:N=5000")
    for r, row in enumerate(t.rows):
        assert float(row[1]) == cs.gamma[r].real and float(row[2]) == cs.gamma[r].imag


@settings(max_examples=200)
@given(st.floats(allow_nan=False))
def test_real_format_roundtrips(x):
    assert float(format_real(x)) == x or (x == 0 and float(format_real(x)) == 0)


def test_csv_quoting_rfc4180(tmp_path):
    t = Table(["a", "b"], [["x,y", 'say "hi"'], [1.5, None]])
    text = to_csv(t)
    assert text == 'a,b\r\n"x,y","say ""hi"""\r\n1.5,\r\n'
    write_results(t, "x", "csv", tmp_path / "q.csv")
    back = read_results(tmp_path / "q.csv")
    assert back.rows == [["x,y", 'say "hi"'], ["1.5", ""]]


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_DIR_ENV, str(tmp_path / "res"))
    assert cli.main(["cesaro", "--seq", "tm", "--L", "2"]) == 0
    assert (tmp_path / "res" / "cesaro.csv").exists()
    assert (tmp_path / "res" / "cesaro.csv.meta.json").exists()


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["gelfond", "--seq", "gtm:tau=1.5"]) == cli.EXIT_USAGE
    assert cli.main(["norms", "--seq", "tm", "--s", "3", "--L", "12", "--budget", "1e6"]) == cli.EXIT_BUDGET
    err = capsys.readouterr().err
    assert "--mode dp" in err
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert cli.main(["cesaro", "--seq", "tm", "--L", "2", "--output", str(blocker / "x.csv")]) == cli.EXIT_IO
    assert "x.csv" in capsys.readouterr().err


def test_random_seed_flag():
    a = cli.parse_args(["gamma", "--seq", "random:q=2", "--R", "3", "--seed", "7"])
    b = cli.parse_args(["gamma", "--seq", "random:q=2,seed=3", "--R", "3", "--seed", "7"])
    assert dict(a.seq.params)["seed"] == 7 and dict(b.seq.params)["seed"] == 3


def test_module_entry_point(tmp_path):
    out = tmp_path / "e.csv"
    p = subprocess.run([sys.executable, "-m", "qmult", "ergodic-demo", "--N", "64", "--output", str(out)],
                       capture_output=True, text=True)
    assert p.returncode == 0, p.stderr
    assert read_results(out).rows[-1][0] == "64"
    p = subprocess.run([sys.executable, "-m", "qmult", "norms"], capture_output=True, text=True)
    assert p.returncode == 2 and "--seq" in p.stderr
