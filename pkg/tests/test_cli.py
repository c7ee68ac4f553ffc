import json
import subprocess
import sys

import numpy as np
import pytest

from rankdcov.cli import EXIT_COMPUTE, EXIT_INPUT, EXIT_OK, InputError, main, read_matrix


@pytest.fixture
def data_file(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(40)
    m = np.c_[x, x + 0.5 * rng.standard_normal(40)]
    path = tmp_path / "xy.csv"
    np.savetxt(path, m, delimiter=",", header="x,y", comments="")
    return path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_test_command_single_method(data_file, capsys):
    code, out, _ = run(["test", data_file, "--px", 1, "--header"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["schema_version"] == "1"
    assert doc["threshold"] == pytest.approx(0.490, abs=5e-3)
    assert doc["reject"] is True


def test_test_command_all_methods(data_file, capsys):
    code, out, _ = run(["test", data_file, "--px", 1, "--header", "--method", "all", "--mc-reps", 99], capsys)
    assert code == EXIT_OK
    docs = json.loads(out)
    assert [d["method"] for d in docs] == [
        "hallin_theoretical", "hallin_montecarlo", "rdcov_permutation", "dcov_permutation",
    ]


def test_two_file_mode_and_pretty(tmp_path, capsys):
    rng = np.random.default_rng(1)
    np.savetxt(tmp_path / "x.csv", rng.standard_normal((30, 2)), delimiter=",")
    np.savetxt(tmp_path / "y.csv", rng.standard_normal((30, 1)), delimiter=",")
    code, out, _ = run(["test", tmp_path / "x.csv", tmp_path / "y.csv", "--format", "pretty"], capsys)
    assert code == EXIT_OK
    assert "statistic" in out and "n, p, q    30, 2, 1" in out


def test_missing_file(tmp_path, capsys):
    missing = tmp_path / "absent.csv"
    code, _, err = run(["test", missing, "--px", 1], capsys)
    assert code == EXIT_INPUT
    assert str(missing) in err


def test_malformed_row_names_line(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,4\n5,abc\n")
    code, _, err = run(["test", p, "--px", 1], capsys)
    assert code == EXIT_INPUT
    assert "line 3" in err


def test_nan_cell_names_row_and_column(tmp_path):
    p = tmp_path / "nan.csv"
    p.write_text("1,2\n3,NaN\n")
    with pytest.raises(InputError, match=r"row 2, column 2"):
        read_matrix(str(p))


def test_ragged_rows(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(InputError, match="line 2"):
        read_matrix(str(p))


def test_scientific_notation(tmp_path):
    p = tmp_path / "sci.csv"
    p.write_text("1e-3;-2.5E2\n")
    assert read_matrix(str(p), delimiter=";").tolist() == [[0.001, -250.0]]


def test_px_must_leave_y_columns(data_file, capsys):
    code, _, err = run(["test", data_file, "--px", 2, "--header"], capsys)
    assert code == EXIT_INPUT and "--px" in err


def test_too_few_rows(tmp_path, capsys):
    p = tmp_path / "small.csv"
    p.write_text("1,2\n2,3\n3,1\n4,4\n5,0\n")
    code, _, _ = run(["test", p, "--px", 1], capsys)
    assert code == EXIT_INPUT


def test_compute_error_exit_code(monkeypatch, data_file, capsys):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr("rankdcov.testkit.run_test", boom)
    code, _, err = run(["test", data_file, "--px", 1, "--header"], capsys)
    assert code == EXIT_COMPUTE and "solver exploded" in err


def test_bad_flag_is_input_error(capsys):
    assert main(["test", "--alpha"]) == EXIT_INPUT


def test_critical_values_verify(tmp_path, capsys):
    cache = tmp_path / "cv.jsonl"
    argv = ["--cache", cache, "critical-values", "--p", "1", "--q", "1-2", "--alpha", "0.1",
            "--verify-paper", "--format", "json"]
    code, out, _ = run(argv, capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["max_abs_deviation"] <= 5e-3
    assert doc["rows"][0]["value"] == pytest.approx(0.306, abs=5e-3)
    # warm rerun: no spectral solves at all
    code, out, _ = run(argv, capsys)
    assert json.loads(out)["spectral_solves"] == 0


def test_critical_values_table_and_csv(capsys):
    code, out, _ = run(["critical-values", "--p", "1", "--q", "1", "--alpha", "0.05"], capsys)
    assert code == EXIT_OK and "alpha = 0.05" in out
    code, out, _ = run(["critical-values", "--p", "1", "--q", "1", "--alpha", "0.05", "--format", "csv"], capsys)
    assert out.splitlines()[0] == "alpha,p,q,value,published"


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    argv = ["simulate", "--example", "2b", "--n", 30, "--reps", 4, "--rho", "0,0.2",
            "--methods", "hallin-theoretical,dcov-permutation", "--seed", 5]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(argv + ["-o", a], capsys)[0] == EXIT_OK
    assert run(argv + ["-o", b, "--threads", 2], capsys)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text()
    assert "# tau=0.5" in text and ",se," in text


def test_simulate_unknown_example(capsys):
    assert run(["simulate", "--example", "9z"], capsys)[0] == EXIT_INPUT


def test_bench_single_row(capsys):
    code, out, _ = run(["bench", "--n", 60, "--format", "json"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert len(doc["rows"]) == 1 and "loglog_slopes" not in doc


def test_bench_slopes(capsys):
    code, out, _ = run(["bench", "--n", "50,100,200", "--format", "json"], capsys)
    doc = json.loads(out)
    assert set(doc["loglog_slopes"]) == {"hungarian", "gabow_tarjan"}
    assert isinstance(doc["gabow_tarjan_faster_at_max_n"], bool)


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "rankdcov.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "rankdcov" in res.stdout
