# core/cli/recipes.py
"""Canned reproduction runs: each recipe is a configuration text plus the command it feeds."""
from pathlib import Path
from typing import Optional

from core.cli.settings import RunConfig, apply_overrides, parse_config

RECIPES: dict[str, tuple[str, str]] = {
    "torsion-oracle": ("oracle", """
[domain]
kind = ball
R = 1.0471975511965976
h = 0.02

[solver]
p_list = 0
"""),
    "hemisphere-eigen": ("oracle", """
[domain]
kind = ball
R = 1.5707963267948966
h = 0.02

[solver]
p_list = 1
"""),
    "power-ball": ("verify", """
[domain]
kind = ball
R = 0.7853981633974483
h = 0.02

[solver]
p = 0.5
"""),
    "power-ellipse": ("verify", """
[domain]
kind = ellipse
a = 0.7853981633974483
b = 0.5235987755982988
h = 0.02

[solver]
p = 2
"""),
    "boundary-layer": ("verify", """
[domain]
kind = ball
R = 0.7853981633974483
h = 0.02

[solver]
p = 3

[verify]
delta = 0.15
"""),
    "sweep": ("sweep", """
[domain]
kind = ball
R = 0.7853981633974483
h = 0.03

[solver]
p_list = 0.9, 0.99, 1.01, 1.1
"""),
}


def recipe_config(name: str, out: Optional[Path] = None) -> tuple[str, RunConfig, str]:
    """(command, validated config, config text) of a recipe; --out replaces the default directory."""
    command, text = RECIPES[name]
    text = text.lstrip()
    config = parse_config(text)
    if out is not None:
        config = apply_overrides(config, out=out)
    return command, config, text
