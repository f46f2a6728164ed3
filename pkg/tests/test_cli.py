import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from ambiport import __version__
from ambiport.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def data_rows(text, table=None):
    """Parse the CSV body, optionally only the block after ``# table: <table>``."""
    lines = text.splitlines()
    if table is not None:
        start = lines.index(f"# table: {table}") + 1
        block = []
        for line in lines[start:]:
            if not line:
                break
            block.append(line)
        lines = block
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_merton_solve(capsys):
    code, out, _ = run(["solve", "--config", str(CONFIGS / "merton.ini")], capsys)
    assert code == 0
    (row,) = data_rows(out)
    assert float(row["fraction_t0"]) == pytest.approx(1.288888888888889, rel=1e-5)
    assert row["kind"] == "neutral"


def test_header_block(capsys):
    code, out, _ = run(["solve", "--config", str(CONFIGS / "merton.ini")], capsys)
    lines = out.splitlines()
    assert lines[0] == f"# ambiport {__version__}"
    assert lines[1] == "# command: solve"
    header = [ln for ln in lines if ln.startswith("#")]
    for key in ("# [market]", "# sigma = 0.3", "# linear = true", "# z = 0.078", "# [solver]"):
        assert key in header
    first_data = next(ln for ln in lines if not ln.startswith("#"))
    assert first_data.startswith("kind,q_star,kappa_star")


def test_twelve_significant_digits(capsys):
    _, out, _ = run(["solve", "--config", str(CONFIGS / "merton.ini")], capsys)
    (row,) = data_rows(out)
    digits = row["fraction_t0"].replace(".", "").lstrip("0")
    assert len(digits) <= 12


def test_json_output(capsys, tmp_path):
    out_file = tmp_path / "solve.json"
    code, out, _ = run(["solve", "--config", str(CONFIGS / "merton.ini"), "--format", "json",
                        "--out", str(out_file)], capsys)
    assert code == 0 and out == ""
    doc = json.loads(out_file.read_text())
    assert doc["version"] == __version__
    assert doc["config"]["prior"]["z"] == "0.078"
    assert doc["solution"][0]["q_star"] is None
    assert doc["solution"][0]["y_hat"] is None


def test_malformed_config_exits_2(capsys, tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[market]\nsigma = -0.3\n[risk]\nalpha = 3\n")
    code, _, err = run(["solve", "--config", str(bad)], capsys)
    assert code == 2
    assert "market" in err and "risk" in err


def test_missing_config_exits_2(capsys, tmp_path):
    code, _, err = run(["solve", "--config", str(tmp_path / "nope.ini")], capsys)
    assert code == 2
    assert "not found" in err


def test_config_directory_lookup(capsys, monkeypatch):
    monkeypatch.setenv("AMBIPORT_CONFIG_DIR", str(CONFIGS))
    code, out, _ = run(["solve", "--config", "merton"], capsys)
    assert code == 0
    assert float(data_rows(out)[0]["fraction_t0"]) == pytest.approx(1.288888888888889, rel=1e-5)


def test_zero_paths_is_usage_error(capsys):
    code, _, err = run(["simulate", "--paths", "0"], capsys)
    assert code == 2
    assert "paths" in err


def test_bad_flag_exits_2():
    out = subprocess.run([sys.executable, "-m", "ambiport.cli", "solve", "--format", "xml"],
                         capture_output=True, text=True)
    assert out.returncode == 2


def test_table_row_count(capsys):
    code, out, _ = run(["table-raa", "--levels", "0.3,2.2"], capsys)
    assert code == 0
    rows = data_rows(out)
    assert [float(r["raa"]) for r in rows] == [0.3, 2.2]
    assert float(rows[0]["q_star"]) >= float(rows[1]["q_star"])


def test_frontier_has_one_drop_per_level(capsys):
    code, out, _ = run(["frontier", "--axis", "rra", "--levels", "0.3,0.7", "--n", "200"], capsys)
    assert code == 0
    rows = data_rows(out)
    for level in ("0.3", "0.7"):
        v = [float(r["terminal_wealth"]) for r in rows if r["level"] == level]
        assert len(v) == 200
        drops = sum(1 for a, b in zip(v, v[1:]) if a > 0 and b == 0)
        assert drops == 1


def test_policy_curves(capsys):
    code, out, _ = run(["policy", "--axis", "raa", "--levels", "0.01", "--t", "9"], capsys)
    assert code == 0
    rows = data_rows(out)
    assert rows and {"wealth", "fraction"} <= set(rows[0])


def test_policy_rejects_time_past_horizon(capsys):
    code, _, _ = run(["policy", "--t", "10"], capsys)
    assert code == 2


def test_simulate_seed_repeat(capsys, tmp_path):
    args = ["simulate", "--paths", "2000", "--steps", "100", "--wealth-paths", "50",
            "--seed", "4", "--config", str(CONFIGS / "table1.ini")]
    _, first, _ = run(args, capsys)
    dump = tmp_path / "paths.csv"
    _, second, _ = run(args + ["--dump", str(dump)], capsys)
    assert first == second
    checks = data_rows(first, "checks")
    names = {r["check"] for r in checks}
    assert {"budget", "supermartingale", "filter_slope", "filter_concentration"} <= names
    assert dump.read_text().startswith("path,t,Y,theta_hat,W_sde,W_surface,pi")
