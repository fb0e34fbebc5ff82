import csv
import json
import math

import pytest

from thermohd import scenarios
from thermohd.cli import main


def _rows(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def _write_scenario(tmp_path, data):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_run_piston_writes_outputs(tmp_path, capsys):
    assert main(["run", "piston", "--out", str(tmp_path)]) == 0
    header, rows = _rows(tmp_path / "piston.csv")
    assert header.startswith("# thermohd ") and "config_hash=" in header
    assert list(rows[0])[:5] == ["t", "q_1", "p_1", "S", "H"]
    assert float(rows[-1]["t"]) == pytest.approx(10.0)
    report = json.loads((tmp_path / "piston.report.json").read_text())
    assert report["passed"] is True
    assert "overall: PASS" in capsys.readouterr().out


def test_verify_piston_table(capsys):
    assert main(["verify", "piston"]) == 0
    out = capsys.readouterr().out
    for name in ("first_law", "second_law", "lagrangian_oracle"):
        line = next(l for l in out.splitlines() if l.startswith(name + " "))
        assert line.rstrip().endswith("PASS")


@pytest.mark.parametrize("name,rows", [
    ("transfer-2c", ["mole_conservation"]),
    ("reaction-2a-b", ["lavoisier", "energy_conservation"]),
])
def test_verify_tables_have_kind_rows(name, rows, capsys):
    assert main(["verify", name, "--t-end", "20"]) in (0, 1)
    out = capsys.readouterr().out
    for r in rows:
        assert any(l.startswith(r + " ") and l.rstrip().endswith("PASS") for l in out.splitlines())


def test_non_lavoisier_reaction_rejected(tmp_path, capsys):
    data = scenarios.load_scenario("reaction-ab")
    data["reaction"]["masses"] = [0.028, 0.030]
    assert main(["run", _write_scenario(tmp_path, data), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "reaction 1 (A <=> B)" in err
    assert not (tmp_path / "reaction-ab.csv").exists()


def test_negative_piston_position_rejected(tmp_path, capsys):
    data = scenarios.load_scenario("piston")
    data["initial"]["q"] = [-0.1]
    assert main(["run", _write_scenario(tmp_path, data), "--out", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    data = scenarios.load_scenario("piston")
    data["frction"] = 1.0
    assert main(["verify", _write_scenario(tmp_path, data)]) == 2
    assert "frction" in capsys.readouterr().err


def test_unknown_scenario_name(capsys):
    assert main(["verify", "no-such-scenario"]) == 2


def test_empty_sweep_rejected(tmp_path, capsys):
    assert main(["sweep", "piston", "friction", "--out", str(tmp_path)]) == 2
    assert "at least one value" in capsys.readouterr().err


def test_dt_sweep_fourth_order(tmp_path, capsys):
    dts = [2e-3, 1e-3, 5e-4, 2.5e-4]
    code = main(["sweep", "piston", "integrator.dt", *map(str, dts), "--method", "RK4Fixed", "--out", str(tmp_path)])
    assert code in (0, 1)
    _, rows = _rows(tmp_path / "piston.sweep.csv")
    res = [float(r["first_law"]) for r in rows]
    orders = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert min(orders) >= 3.7, orders


def test_friction_sweep_monotone_entropy(tmp_path, capsys):
    # weakly damped points have not settled by t_end, so their equilibrium check fails
    assert main(["sweep", "piston-forced", "friction", "0,5,20", "--out", str(tmp_path)]) == 1
    _, rows = _rows(tmp_path / "piston-forced.sweep.csv")
    assert rows[0]["passed"] == "0" and rows[-1]["passed"] == "1"
    S = [float(r["S_end"]) for r in rows]
    assert S[0] == 0.0
    assert S[0] < S[1] < S[2]


def test_sweep_parallel_matches_serial(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["sweep", "piston", "friction", "0.5", "1.0", "--t-end", "2"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b), "--jobs", "2"])
    assert (a / "piston.sweep.csv").read_bytes() == (b / "piston.sweep.csv").read_bytes()


def test_rerun_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        # a 10 s run stops short of equilibrium, hence exit code 1
        assert main(["run", "transfer-3c", "--t-end", "10", "--out", str(d)]) == 1
    for f in ("transfer-3c.csv", "transfer-3c.report.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_out_env_and_flag_precedence(tmp_path, monkeypatch, capsys):
    env_dir, flag_dir = tmp_path / "env", tmp_path / "flag"
    monkeypatch.setenv("THERMOHD_OUT", str(env_dir))
    assert main(["run", "skate", "--t-end", "1"]) == 0
    assert (env_dir / "skate.csv").exists()
    assert main(["run", "skate", "--t-end", "1", "--out", str(flag_dir)]) == 0
    assert (flag_dir / "skate.csv").exists()


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for name in scenarios.builtin_names():
        assert name in out
    assert main(["list-scenarios", "--show", "piston"]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "piston"
    assert main(["list-scenarios", "--show", "nope"]) == 2
