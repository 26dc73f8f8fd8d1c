import argparse
import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from atomchain import cli

CONFIGS = sorted((Path(__file__).resolve().parents[1] / "configs").glob("*.json"))


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return header, list(reader)


# value parsing


@pytest.mark.parametrize(
    "text, value",
    [("0.25", np.pi / 4), ("1/4", np.pi / 4), ("-1/2", -np.pi / 2), ("arcsin(0.5)", np.pi / 6), ("arcsin(1/2)", np.pi / 6)],
)
def test_parse_angle(text, value):
    assert cli.parse_angle(text) == pytest.approx(value)


@pytest.mark.parametrize("text", ["abc", "arcsin(2)", "1/0"])
def test_parse_angle_rejects(text):
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_angle(text)


@pytest.mark.parametrize(
    "text, value", [("pi/2a", np.pi / 2), ("-pi/4", -np.pi / 4), ("pi", np.pi), ("0", 0.0), ("0.5", np.pi / 2), ("2pi/3a", 2 * np.pi / 3)]
)
def test_parse_wavenumber(text, value):
    assert cli.parse_wavenumber(text) == pytest.approx(value)


def test_grid_index_notation_and_snap():
    assert cli.to_index("m:12", 101, False).m == 12
    assert cli.to_index("pi/2a", 101, True).m == 25
    with pytest.raises(cli.OffGridError):
        cli.to_index("pi/2a", 101, False)


def test_parse_state_and_U():
    assert cli.parse_state("K=0,p=pi/2a") == {"K": "0", "p": "pi/2a"}
    assert cli.parse_state("K=0,nu=BS") == {"K": "0", "nu": "BS"}
    for bad in ("K=0", "p=1", "K=0,p=1,nu=BS", "K=0,nu=XX", "K0"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_state(bad)
    assert cli.parse_U("strong") == cli.STRONG_U
    assert cli.parse_U("2.5") == 2.5
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_U("-1")


def test_parse_range_and_bool():
    assert cli.parse_range("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert cli.parse_range("0.3,0.5") == [0.3, 0.5]
    assert cli.parse_bool("yes") and not cli.parse_bool("0")
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_bool("maybe")


def test_fixed_float_format():
    assert cli.fmt(1 / 3) == "0.333333333333"
    assert cli.fmt(0.0) == "0" and cli.fmt(7) == "7" and cli.fmt(True) == "1"
    assert float(cli.fmt(np.pi)) == pytest.approx(np.pi, rel=1e-12)


def test_worker_count(monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    assert cli.worker_count(None) == 3
    assert cli.worker_count(5) == 5
    monkeypatch.setenv(cli.WORKERS_ENV, "many")
    with pytest.raises(cli.ConfigError):
        cli.worker_count(None)


# tasks


def test_rates_task(capsys):
    code, out, _ = run_cli(capsys, "rates", "--xmax", "1")
    header, rows = rows_of(out)
    assert code == 0
    assert header == ["x[a]", "re_Gamma[gamma0]", "im_Gamma[gamma0]"]
    assert [round(float(v), 3) for v in rows[0][1:]] == [1.0, -0.637]
    assert [round(float(v), 3) for v in rows[1][1:]] == [0.009, -0.119]


def test_off_grid_state_names_nearest_value(capsys):
    code, out, err = run_cli(capsys, "pattern", "--state", "K=0,p=pi/2a", "--U", "strong")
    assert code == 2 and out == ""
    assert "nearest grid value is m = 25" in err and "--snap" in err


def test_pattern_example_shows_single_peaks(capsys):
    code, out, _ = run_cli(capsys, "pattern", "--state", "K=0,p=pi/2a", "--U", "strong", "--snap", "--workers", "1")
    header, rows = rows_of(out)
    assert code == 0 and "intensity[norm]" in header
    col = header.index("intensity[norm]")
    kcol = header.index("kbar_a[pi]")
    values = np.array([float(r[col]) for r in rows])
    lit = {r[kcol] for r, v in zip(rows, values) if v > 0.1 * values.max()}
    # every strong line sits at kbar = K/2 -+ p
    assert lit == {"0.49504950495", "-0.49504950495"}


def test_g2_example_plateaus(capsys):
    code, out, _ = run_cli(capsys, "g2", "--lambda-over-a", "0.5", "--beta2", "arcsin(0.5)")
    header, rows = rows_of(out)
    assert code == 0
    free = header.index("g2_U0[1]")
    crosses = [float(r[free]) for r in rows if r[1] == "1"]
    others = [float(r[free]) for r in rows if r[1] == "0"]
    assert crosses and all(v == pytest.approx(1 / 6) for v in crosses)
    assert all(v == pytest.approx(2 / 3) for v in others)


def test_json_output_schema(capsys):
    code, out, _ = run_cli(capsys, "eigen", "--M", "11", "--U", "2", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["task"] == "eigen"
    assert doc["columns"][0] == "nu" and len(doc["rows"]) == 11
    assert doc["rows"][-1][0] == "BS"
    assert doc["meta"] == {"K_m": 0}


def test_output_file(tmp_path, capsys):
    target = tmp_path / "sums.csv"
    code, out, _ = run_cli(capsys, "sums", "--M-sums", "1001", "--q-step", "100", "--output", str(target))
    assert code == 0 and out == ""
    header, rows = rows_of(target.read_text())
    assert header[:3] == ["qa[pi]", "Q_bg[1]", "Q_bg_limit[1]"] and len(rows) == 6


def test_identical_runs_are_byte_identical(capsys):
    argv = ["pump1", "--M", "21", "--U", "strong", "--beta-exc", "0", "--n-beta", "41", "--snap"]
    _, first, _ = run_cli(capsys, *argv)
    _, second, _ = run_cli(capsys, *argv)
    assert first == second and len(first) > 100


def test_worker_pool_does_not_change_output(capsys):
    argv = ["pattern", "--state", "K=0,nu=BS", "--U", "strong", "--lambda-grid", "0.3,0.5,0.7", "--n-beta", "11"]
    _, serial, _ = run_cli(capsys, *argv, "--workers", "1")
    _, pooled, _ = run_cli(capsys, *argv, "--workers", "3")
    assert serial == pooled


def test_verify_subset_exits_zero(capsys):
    code, out, _ = run_cli(capsys, "verify", "--only", "1,3,11")
    header, rows = rows_of(out)
    assert code == 0
    assert header == ["criterion", "status", "check", "detail"]
    assert {r[0] for r in rows} == {"1", "3", "11"} and all(r[1] == "PASS" for r in rows)


def test_verify_strict_fails_on_known_deviation(capsys):
    code, out, _ = run_cli(capsys, "verify", "--only", "6")
    assert code == 0 and "XFAIL" in out
    code, _, _ = run_cli(capsys, "verify", "--only", "6", "--strict")
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "atomchain", "rates", "--xmax", "0"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("x[a],")


# configs


def write(tmp_path, text):
    path = tmp_path / "cfg.json"
    path.write_text(text)
    return str(path)


def test_unknown_key_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{\n  "task": "rates",\n  "M": 11,\n  "colour": "red"\n}\n')
    code, _, err = run_cli(capsys, "run", path)
    assert code == 2 and f"{path}:4: unknown key 'colour'" in err


def test_invalid_json_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{\n  "task": "rates",\n  "M": 11,\n}\n')
    code, _, err = run_cli(capsys, "run", path)
    assert code == 2 and f"{path}:4: invalid JSON" in err


def test_bad_value_reports_line(tmp_path, capsys):
    path = write(tmp_path, '{\n  "task": "rates",\n  "U": "huge"\n}\n')
    code, _, err = run_cli(capsys, "run", path)
    assert code == 2 and f"{path}:3: bad value for 'U'" in err


def test_unknown_task_and_missing_key(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", write(tmp_path, '{"task": "plot"}'))
    assert code == 2 and "'task' must be one of" in err
    code, _, err = run_cli(capsys, "run", write(tmp_path, '{"task": "momdist"}'))
    assert code == 2 and "missing required key 'state'" in err


def test_invalid_chain_is_rejected(tmp_path, capsys):
    code, _, err = run_cli(capsys, "run", write(tmp_path, '{"task": "rates", "M": 10}'))
    assert code == 2 and "M must be an odd integer" in err


def test_config_equals_command_line(tmp_path, capsys):
    path = write(tmp_path, json.dumps({"task": "momdist", "M": 21, "U": "strong", "state": {"K": "0", "nu": "BS"}}))
    _, from_config, _ = run_cli(capsys, "run", path)
    _, from_flags, _ = run_cli(capsys, "momdist", "--M", "21", "--U", "strong", "--state", "K=0,nu=BS")
    assert from_config == from_flags


def test_every_figure_has_a_config():
    figures = {p.name.split("_")[0].rstrip("abcdef") for p in CONFIGS}
    assert figures == {f"fig{n}" for n in range(2, 11)}


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_figure_config_runs(path, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "4")
    data = json.loads(path.read_text())
    assert data.get("description")
    target = tmp_path / "out.csv"
    code, _, err = run_cli(capsys, "run", str(path), "--output", str(target))
    assert code == 0, err
    header, rows = rows_of(target.read_text())
    assert rows and all("[" in h for h in header if h not in ("kind", "q_zero", "M", "nu"))
