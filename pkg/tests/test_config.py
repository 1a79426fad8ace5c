import math
from pathlib import Path
import pytest

from core.cli.settings import apply_overrides, parse_config
from core.config import Config, get_default_threads
from core.errors import ConfigError
from core.mesh.domain import GeodesicBall, PlanarConvexCurve, SphericalEllipse

MINIMAL = """
[domain]
kind = ball
R = 0.7853981633974483
h = 0.05
"""


def test_minimal_config_fills_defaults():
    config = parse_config(MINIMAL)
    assert config.h == 0.05
    assert config.domain.R == pytest.approx(math.pi / 4)
    assert config.solver.tol_fix == 1e-10
    assert config.solver.max_outer == 500
    assert config.verify.delta == 0.15
    assert config.verify.level_fractions == [0.1, 0.25, 0.5, 0.75, 0.9]
    assert config.seed == 0
    assert config.exponents() == []
    assert isinstance(config.domain.to_spec(), GeodesicBall)


def test_parsing_is_deterministic():
    assert parse_config(MINIMAL).model_dump_json() == parse_config(MINIMAL).model_dump_json()


def test_full_config():
    config = parse_config("""
[domain]
kind = ellipse
a = 0.7853981633974483
b = 0.5235987755982988
h = 0.02

[solver]
p_list = 0.9, 0.99, 1.01
damping = 0.5
continuation = false

[verify]
level_fractions = 0.2, 0.8
hessian_mode = direct

[output]
dir = /tmp/lane-emden-run
seed = 42
""")
    assert isinstance(config.domain.to_spec(), SphericalEllipse)
    assert config.exponents() == [0.9, 0.99, 1.01]
    assert config.solver.damping == 0.5
    assert config.solver.continuation is False
    assert config.verify.level_fractions == [0.2, 0.8]
    assert config.verify.hessian_mode == "direct"
    assert config.output.dir == Path("/tmp/lane-emden-run")
    assert config.seed == 42


def test_curve_samples_are_parsed():
    config = parse_config("""
[domain]
kind = curve
samples = 0.3 0; 0.2 0.2; 0 0.3; -0.2 0.2; -0.3 0; -0.2 -0.2; 0 -0.3; 0.2 -0.2
h = 0.05
""")
    spec = config.domain.to_spec()
    assert isinstance(spec, PlanarConvexCurve)
    assert len(spec.samples) == 8


def test_negative_exponent_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "\n[solver]\np = -0.5\n")
    assert info.value.field == "solver.p"
    assert info.value.line == 8


def test_duplicate_key_names_the_key():
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL + "R = 0.5\n")
    assert "R" in str(info.value)
    assert info.value.line == 6


@pytest.mark.parametrize("text, field", [
    (MINIMAL + "radius = 0.3\n", "domain.radius"),
    (MINIMAL + "\n[solver]\nspeed = 2\n", "solver.speed"),
    (MINIMAL + "\n[plot]\ncolor = red\n", "plot"),
])
def test_unknown_keys_are_rejected(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.field == field


@pytest.mark.parametrize("text", [
    MINIMAL.replace("h = 0.05", "h = 0.5"),
    MINIMAL.replace("h = 0.05", ""),
    MINIMAL.replace("R = 0.7853981633974483", "R = 4"),
    MINIMAL.replace("kind = ball", "kind = ellipse"),
    MINIMAL + "\n[solver]\np = 0.5\np_list = 0.5, 2\n",
    "[solver]\np = 1\n",
    "h = 0.05\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_flag_overrides_are_validated(tmp_path):
    config = apply_overrides(parse_config(MINIMAL), p=2.0, h=0.03, out=tmp_path, experimental_p=True)
    assert config.p == 2.0
    assert config.h == 0.03
    assert config.output.dir == tmp_path
    assert config.solver.experimental_p
    with pytest.raises(ConfigError):
        apply_overrides(config, h=0.3)


def test_override_p_replaces_p_list():
    config = parse_config(MINIMAL + "\n[solver]\np_list = 0.5, 2\n")
    assert apply_overrides(config, p=3.0).exponents() == [3.0]


def test_environment_overrides_settings(monkeypatch):
    monkeypatch.setenv("LANE_EMDEN_TOL_FIX", "1e-6")
    monkeypatch.setenv("LANE_EMDEN_THREADS", "3")
    assert Config().tol_fix == 1e-6
    assert get_default_threads() == 3


def test_config_error_formats_location():
    err = ConfigError("bad value", line=4, field="solver.p")
    assert str(err) == "bad value (line 4, field 'solver.p')"
    assert str(ConfigError("bad value")) == "bad value"


def test_quadratic_fit_is_selectable():
    config = parse_config(MINIMAL + "\n[verify]\nfit_degree = 2\n")
    assert config.verify.fit_degree == 2
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "\n[verify]\nfit_degree = 4\n")
