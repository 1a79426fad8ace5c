import json
import math
import os
import pytest
from click.testing import CliRunner

from core.cli import commands
from core.cli.commands import EXIT_CONFIG, EXIT_ERROR, EXIT_OK, EXIT_VERDICT, cli, run
from core.cli.settings import parse_config
from core.data.storage import LOCK_NAME, read_csv
from core.errors import ConfigError, MeshFailure


def _config(tmp_path, R=math.pi / 4, h=0.1, extra=""):
    path = tmp_path / "run.ini"
    path.write_text(f"[domain]\nkind = ball\nR = {R!r}\nh = {h}\n{extra}")
    return path


def _invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def test_mesh_command_writes_mesh(tmp_path):
    out = tmp_path / "out"
    result = _invoke("mesh", "--config", _config(tmp_path), "--out", out, "--quiet")
    assert result.exit_code == EXIT_OK
    header = (out / "mesh.txt").read_text().splitlines()[0].split()
    assert len(header) == 3
    assert not (out / LOCK_NAME).exists()


def test_solve_command_writes_field_and_report(tmp_path):
    out = tmp_path / "out"
    result = _invoke("solve", "--config", _config(tmp_path), "--p", 0, "--out", out, "--quiet")
    assert result.exit_code == EXIT_OK
    field = read_csv("field.csv", out)
    assert (field["u"] >= 0).all()
    report = json.loads((out / "solve.json").read_text())
    assert report["regime"] == "torsion"


def test_solve_output_is_deterministic(tmp_path):
    config = _config(tmp_path)
    for name in ("a", "b"):
        assert _invoke("solve", "--config", config, "--p", 0.5, "--out", tmp_path / name, "--quiet").exit_code == 0
    for filename in ("field.csv", "solve.json"):
        assert (tmp_path / "a" / filename).read_bytes() == (tmp_path / "b" / filename).read_bytes()


def test_nonconvex_ball_is_refused(tmp_path):
    config = _config(tmp_path, R=2 * math.pi / 3)
    result = _invoke("verify", "--config", config, "--p", 0.5, "--out", tmp_path / "out", "--quiet")
    assert result.exit_code == EXIT_ERROR
    assert not (tmp_path / "out" / "verification.json").exists()


def test_experimental_exponent_needs_flag(tmp_path):
    result = _invoke("solve", "--config", _config(tmp_path), "--p", 4, "--out", tmp_path / "out", "--quiet")
    assert result.exit_code == EXIT_ERROR


@pytest.mark.parametrize("args", [
    ("--p", -0.5),
    ("--h", 0.5),
])
def test_bad_overrides_exit_with_config_code(tmp_path, args):
    result = _invoke("solve", "--config", _config(tmp_path), *args, "--out", tmp_path / "out", "--quiet")
    assert result.exit_code == EXIT_CONFIG


def test_malformed_config_exits_with_config_code(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[domain]\nkind = ball\nR = 0.5\nR = 0.6\nh = 0.05\n")
    assert _invoke("mesh", "--config", path, "--out", tmp_path / "out", "--quiet").exit_code == EXIT_CONFIG


def test_missing_config_flag(tmp_path):
    assert _invoke("mesh", "--out", tmp_path, "--quiet").exit_code == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert _invoke("mesh", "--config", tmp_path / "nope.ini", "--quiet").exit_code == EXIT_ERROR


def test_unknown_recipe(tmp_path):
    result = _invoke("recipe", "no-such-recipe", "--out", tmp_path, "--quiet")
    assert result.exit_code == EXIT_CONFIG
    assert "torsion-oracle" in result.output


def test_oracle_needs_a_ball(tmp_path):
    path = tmp_path / "ellipse.ini"
    path.write_text("[domain]\nkind = ellipse\na = 0.7\nb = 0.5\nh = 0.1\n")
    assert _invoke("oracle", "--config", path, "--out", tmp_path / "out", "--quiet").exit_code == EXIT_ERROR


@pytest.mark.parametrize("outcome, code", [
    (lambda config: EXIT_VERDICT, EXIT_VERDICT),
    (lambda config: (_ for _ in ()).throw(MeshFailure("no mesh")), EXIT_ERROR),
    (lambda config: (_ for _ in ()).throw(ConfigError("bad", field="solver.p")), EXIT_CONFIG),
])
def test_run_maps_outcomes_to_exit_codes(tmp_path, monkeypatch, outcome, code):
    monkeypatch.setitem(commands.COMMANDS, "solve", outcome)
    config = parse_config(f"[domain]\nkind = ball\nR = 0.7\nh = 0.1\n\n[output]\ndir = {tmp_path}\n")
    assert run("solve", config) == code
    assert not (tmp_path / LOCK_NAME).exists()


def test_lock_blocks_concurrent_run(tmp_path):
    (tmp_path / LOCK_NAME).write_text(str(os.getppid()))
    config = parse_config(f"[domain]\nkind = ball\nR = 0.7\nh = 0.1\n\n[output]\ndir = {tmp_path}\n")
    assert run("mesh", config) == EXIT_ERROR
    assert not (tmp_path / "mesh.txt").exists()


@pytest.mark.slow
def test_verify_torsion_on_quarter_ball(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, h=0.02)
    result = _invoke("verify", "--config", config, "--p", 0, "--out", out, "--quiet")
    assert result.exit_code == EXIT_OK
    report = json.loads((out / "verification.json").read_text())
    assert report["definiteness"] == "negative_definite"
    assert report["passed"]
    assert list(read_csv("levels.csv", out).columns) == ["c", "X", "Y", "kappa_g"]


@pytest.mark.slow
def test_sweep_recipe(tmp_path):
    result = _invoke("recipe", "sweep", "--out", tmp_path, "--quiet")
    assert result.exit_code == EXIT_OK
    report = json.loads((tmp_path / "sweep.json").read_text())
    assert report["monotone"] == {"sub": True, "super": True}
    assert (tmp_path / "sweep.ini").exists()


def test_run_writes_inputs_under_the_lock(tmp_path, monkeypatch):
    seen = {}

    def command(config):
        seen["lock"] = (tmp_path / LOCK_NAME).exists()
        seen["text"] = (tmp_path / "power-ball.ini").read_text()
        return EXIT_OK

    monkeypatch.setitem(commands.COMMANDS, "verify", command)
    config = parse_config(f"[domain]\nkind = ball\nR = 0.7\nh = 0.1\n\n[output]\ndir = {tmp_path}\n")
    assert run("verify", config, inputs={"power-ball.ini": "[domain]\n"}) == EXIT_OK
    assert seen == {"lock": True, "text": "[domain]\n"}


def test_recipe_leaves_a_locked_directory_alone(tmp_path):
    (tmp_path / LOCK_NAME).write_text(str(os.getppid()))
    result = _invoke("recipe", "power-ball", "--out", tmp_path, "--quiet")
    assert result.exit_code == EXIT_ERROR
    assert not (tmp_path / "power-ball.ini").exists()
