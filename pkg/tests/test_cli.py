import json
import subprocess
import sys

import pytest

from rank1.cli import config_from_args, main
from rank1.errors import ConfigInvalid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_check_pass_and_fail(capsys):
    code, out, _ = run(capsys, "check")
    assert code == 0 and json.loads(out)["passed"]
    code, out, err = run(capsys, "check", "--p", "2*n")
    assert code == 9
    assert json.loads(err)["error"] == "GapConditionFailed"
    assert not json.loads(out)["p"]["passed"]


def test_build_minimal_heights(capsys):
    code, out, err = run(capsys, "build", "--spacer-margin", "minimal", "--jmax", "3")
    assert code == 0
    report = json.loads(out)
    assert report["heights"] == ["1", "4", "521"]
    perm2 = report["plan"]["perms"][1]
    assert perm2["swaps"] == [["27", "9", "8"], ["216", "36", "8"], ["343", "49", "8"]]
    assert report["checkpoints"]["error"] == "EmptyCheckpoint"


def test_theorem1_deterministic_and_schedule_round_trip(capsys, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    code, out, _ = run(capsys, "theorem1", "--out", str(a))
    assert code == 0
    summary = json.loads(out)
    assert summary["c"].startswith("0.367879441171")
    assert run(capsys, "theorem1", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()

    sched = tmp_path / "s.json"
    assert run(capsys, "build", "--out", str(sched))[0] == 0
    assert run(capsys, "theorem1", "--schedule", str(sched), "--out", str(c))[0] == 0
    assert a.read_bytes() == c.read_bytes()


def test_theorem1_stdout_csv(capsys):
    code, out, err = run(capsys, "theorem1", "--jmax", "3", "--precision", "8")
    assert code == 0
    assert out.splitlines()[0].startswith("n_or_N,stage,parity")
    assert json.loads(err)["c"] == "0.36787944"


def test_schedule_sequence_mismatch(capsys, tmp_path):
    sched = tmp_path / "s.json"
    run(capsys, "build", "--jmax", "3", "--out", str(sched))
    code, _, err = run(capsys, "theorem1", "--schedule", str(sched), "--q", "mild")
    assert code == 2 and json.loads(err)["error"] == "ConfigInvalid"


def test_nonrecurrence_and_oracle(capsys, tmp_path):
    out_csv = tmp_path / "n.csv"
    code, out, _ = run(capsys, "nonrecurrence", "--jmax", "3", "--n-max", "50",
                       "--out", str(out_csv))
    assert code == 0 and json.loads(out)["all_bounds_hold"]
    assert len(out_csv.read_text().splitlines()) == 52
    code, out, _ = run(capsys, "oracle", "--jmax", "3", "--events", "2", "--mc-samples", "5000",
                       "--seed", "3", "--workers", "2")
    assert code == 0 and len(json.loads(out)["events"]) == 2
    code, _, err = run(capsys, "nonrecurrence", "--jmax", "3", "--e-floor", "1", "--re-floor", "1")
    assert code == 2


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[rank1]\njmax = 3\nq = mild\nprecision = 9\nstretch = 2:2\n")
    cfg = config_from_args(["theorem1", "--config", str(ini), "--precision", "12"])
    assert cfg.jmax == 3 and cfg.q == "mild" and cfg.precision == 12
    assert cfg.stretch == {2: 2}
    bad = tmp_path / "bad.ini"
    bad.write_text("[rank1]\ncolour = blue\n")
    with pytest.raises(ConfigInvalid):
        config_from_args(["check", "--config", str(bad)])


@pytest.mark.parametrize("argv", [
    ["check", "--precision", "0"],
    ["check", "--precision", "51"],
    ["theorem1", "--cap", "0"],
    ["build", "--stretch", "4-2"],
    ["build", "--p", "n^1/2"],
    ["check", "--config", "/nonexistent.ini"],
    ["frobnicate"],
    ["build", "--preset", "wobbly"],
    ["build", "--jmax", "three"],
])
def test_invalid_configs_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and json.loads(err)["exit_code"] == 2


def test_module_errors_get_their_codes(capsys):
    code, _, err = run(capsys, "theorem1", "--spacer-margin", "minimal", "--jmax", "3")
    assert code == 5 and json.loads(err)["error"] == "EmptyCheckpoint"
    code, _, err = run(capsys, "theorem1", "--cap", "1")
    assert code == 6


def test_console_script_and_log_env(tmp_path):
    env = {"RANK1_LOG": "INFO", "PATH": "/usr/bin:/bin:/usr/local/bin"}
    proc = subprocess.run([sys.executable, "-m", "rank1.cli", "build", "--jmax", "3"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert "realized" in proc.stderr
    assert json.loads(proc.stdout)["heights"] == ["1", "13", "19736"]
