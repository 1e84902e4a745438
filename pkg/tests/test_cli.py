import json
import subprocess
import sys

import pytest

from p2prisk.cli import main

QUICK = ["--epochs", "3", "--hidden", "4", "--lookback", "6"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().err


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fx")
    assert main(["synth", "--out-dir", str(d), "--seed", "7", "--n-loans", "3000", "--n-months", "48"]) == 0
    return d


def test_synth_byte_identical(tmp_path, capsys):
    for sub in ("a", "b"):
        code, _ = run(capsys, "synth", "--out-dir", tmp_path / sub, "--seed", 7, "--n-loans", 2000, "--n-months", 30)
        assert code == 0
    for name in ("loans.csv", "macro.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_full_chain(fixture_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code, _ = run(capsys, "ingest", "--loans", fixture_dir / "loans.csv", "--macro", fixture_dir / "macro.csv",
                  "--out-dir", out)
    assert code == 0
    report = json.loads((out / "ingest_report.json").read_text())
    assert report["n_months"] == 48
    code, _ = run(capsys, "compare", "--series", out / "monthly.csv", "--out-dir", out, *QUICK)
    assert code == 0
    rows = (out / "rmse_table.csv").read_text().splitlines()
    assert rows[0] == "model,train_rmse,test_rmse" and len(rows) == 4
    for row in rows[1:]:
        tr, te = map(float, row.split(",")[1:])
        assert tr == tr and te == te  # finite, not NaN
    assert (out / "trend.csv").read_text().startswith("month,actual,lstm1,lstm2,ar,split\n")
    code, err = run(capsys, "baseline", "--series", out / "monthly.csv", "--out-dir", out)
    assert code == 0
    assert (out / "correlogram.csv").exists()
    summary = (out / "model_summary.csv").read_text()
    assert "selected" in summary and "VAR(" in summary
    code, _ = run(capsys, "train", "--series", out / "monthly.csv", "--use-macro", "--out-dir", out, *QUICK)
    assert code == 0
    assert json.loads((out / "lstm2.json").read_text())["use_macro"] is True
    assert len((out / "lstm2_loss.csv").read_text().splitlines()) == 4


def test_compare_from_raw_loans(fixture_dir, tmp_path, capsys):
    code, _ = run(capsys, "compare", "--loans", fixture_dir / "loans.csv", "--macro", fixture_dir / "macro.csv",
                  "--out-dir", tmp_path, *QUICK)
    assert code == 0


def test_compare_idempotent(fixture_dir, tmp_path, capsys):
    for sub in ("a", "b"):
        code, _ = run(capsys, "compare", "--loans", fixture_dir / "loans.csv", "--macro", fixture_dir / "macro.csv",
                      "--out-dir", tmp_path / sub, "--seed", 5, *QUICK)
        assert code == 0
    for name in ("rmse_table.csv", "trend.csv", "compare_meta.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_macro_names_path(fixture_dir, tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code, err = run(capsys, "compare", "--loans", fixture_dir / "loans.csv", "--macro", missing, "--out-dir", tmp_path)
    assert code != 0
    msg = json.loads(err.strip().splitlines()[-1])
    assert str(missing) in msg["message"]
    assert msg["exit_code"] == code == 2


def test_bad_data_exit_code(tmp_path, capsys):
    bad = tmp_path / "loans.csv"
    bad.write_text("id,issue_d,loan_status\n1,Jan-2015,Issued\n")
    code, err = run(capsys, "ingest", "--loans", bad, "--out-dir", tmp_path)
    assert code == 2
    assert "Issued" in err


def test_config_errors_exit_1(tmp_path, capsys):
    code, _ = run(capsys, "compare", "--series", tmp_path / "x.csv", "--split-ratio", "1.5")
    assert code == 1
    code, _ = run(capsys, "synth", "--config", tmp_path / "missing.ini")
    assert code == 1
    code, _ = run(capsys, "bogus")
    assert code == 1


def test_config_file_and_flag_override(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text(f"[p2prisk]\nout_dir = {tmp_path / 'from_file'}\nn_loans = 500\nn_months = 24\nseed = 1\n")
    code, _ = run(capsys, "synth", "--config", ini)
    assert code == 0
    assert len((tmp_path / "from_file" / "loans.csv").read_text().splitlines()) == 501
    code, _ = run(capsys, "synth", "--config", ini, "--n-loans", 600, "--out-dir", tmp_path / "flag")
    assert code == 0
    assert len((tmp_path / "flag" / "loans.csv").read_text().splitlines()) == 601


def test_unknown_config_key(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[p2prisk]\nlearning_rat = 0.1\n")
    code, err = run(capsys, "synth", "--config", ini)
    assert code == 1 and "learning_rat" in err


def test_console_script_runs(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "p2prisk", "synth", "--out-dir", str(tmp_path),
                           "--n-loans", "300", "--n-months", "24"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "macro.csv").exists()
