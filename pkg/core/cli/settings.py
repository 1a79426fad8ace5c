# core/cli/settings.py
"""Run configuration: the section-based text format and its validated model.

    [domain]   kind = ball | ellipse | curve, R, center = x,y,z, a, b, samples = X Y; X Y; ..., h
    [solver]   p or p_list, tol_fix, tol_lin, tol_res, max_outer, damping, continuation, ...
    [verify]   exclusion_margin, delta, level_fractions, epsilon_def_scale, hessian_mode, ...
    [output]   dir, seed

Angles are radians. Anything not listed is rejected.
"""
from configparser import ConfigParser, DuplicateOptionError, DuplicateSectionError, Error as ParserError
from pathlib import Path
from typing import Literal, Optional
import math
import re
from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, ValidationError, model_validator

from core.config import CONFIG
from core.errors import ConfigError
from core.geometry.stereo import SOUTH_POLE
from core.mesh.domain import DOMAIN_ADAPTER, DomainSpec
from core.solver.regimes import SolverOptions
from core.utils.logging import get_logger
from core.verify.engine import VerifySettings as EngineVerifySettings

logger = get_logger(__name__)

SECTIONS = ("domain", "solver", "verify", "output")
# keys that live on RunConfig itself, by the section they are written in
TOP_LEVEL_KEYS = {"domain": {"h"}, "solver": {"p", "p_list"}, "output": {"seed"}}
LIST_KEYS = {"p_list", "level_fractions", "center"}


class DomainSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["ball", "ellipse", "curve"] = "ball"
    R: Optional[float] = None
    center: Optional[tuple[float, float, float]] = None
    a: Optional[float] = None
    b: Optional[float] = None
    samples: Optional[str] = None
    n_boundary: int = Field(CONFIG.n_boundary, ge=16)

    @model_validator(mode="after")
    def _required(self) -> "DomainSettings":
        needed = {"ball": ["R"], "ellipse": ["a", "b"], "curve": ["samples"]}[self.kind]
        missing = [k for k in needed if getattr(self, k) is None]
        if missing:
            raise ValueError(f"domain kind '{self.kind}' needs {', '.join(missing)}")
        try:
            self.to_spec()
        except ValidationError as e:
            raise ValueError(f"invalid {self.kind}: {e.errors()[0]['msg']}") from e
        return self

    def to_spec(self) -> DomainSpec:
        if self.kind == "ball":
            data = {"kind": "ball", "radius": self.R}
            if self.center is not None:
                x, y, z = self.center
                n = math.sqrt(x * x + y * y + z * z)
                data["center"] = {"x": x / n, "y": y / n, "z": z / n}
            else:
                data["center"] = SOUTH_POLE
        elif self.kind == "ellipse":
            data = {"kind": "ellipse", "a": self.a, "b": self.b}
        else:
            pairs = [chunk.split() for chunk in self.samples.split(";") if chunk.strip()]
            data = {"kind": "curve", "samples": [{"X": float(x), "Y": float(y)} for x, y in pairs]}
        return DOMAIN_ADAPTER.validate_python(data)


class SolverSettings(SolverOptions):
    model_config = ConfigDict(extra="forbid")


class VerifySettings(EngineVerifySettings):
    model_config = ConfigDict(extra="forbid")


class OutputSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: Path = CONFIG.output_dir


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    domain: DomainSettings
    h: float = Field(..., gt=0.0, le=0.2)
    p: Optional[NonNegativeFloat] = None
    p_list: Optional[list[NonNegativeFloat]] = None
    solver: SolverSettings = Field(default_factory=SolverSettings)
    verify: VerifySettings = Field(default_factory=VerifySettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    seed: int = 0

    @model_validator(mode="after")
    def _one_exponent_source(self) -> "RunConfig":
        if self.p is not None and self.p_list is not None:
            raise ValueError("give either p or p_list, not both")
        return self

    def exponents(self) -> list[float]:
        if self.p_list is not None:
            return list(self.p_list)
        return [self.p] if self.p is not None else []


def _line_map(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number, for diagnostics."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if m := re.match(r"^\[(.+)\]$", stripped):
            section = m.group(1).strip()
        elif section and (m := re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", stripped)):
            where.setdefault((section, m.group(1).strip()), n)
    return where


def _section_lines(text: str) -> dict[str, int]:
    return {
        m.group(1).strip(): n
        for n, line in enumerate(text.splitlines(), start=1)
        if (m := re.match(r"^\s*\[(.+)\]\s*$", line))
    }


def _locate(err: ValidationError, lines: dict[tuple[str, str], int]) -> tuple[Optional[int], Optional[str]]:
    loc = [str(x) for x in err.errors()[0]["loc"]]
    if not loc:
        return None, None
    if loc[0] in SECTIONS and len(loc) > 1:
        return lines.get((loc[0], loc[1])), f"{loc[0]}.{loc[1]}"
    for section, keys in TOP_LEVEL_KEYS.items():
        if loc[0] in keys:
            return lines.get((section, loc[0])), f"{section}.{loc[0]}"
    return None, loc[0]


def _message(err: ValidationError) -> str:
    first = err.errors()[0]
    return first["msg"]


def validate_run_config(data: dict, lines: Optional[dict] = None) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        line, field = _locate(e, lines or {})
        raise ConfigError(_message(e), line=line, field=field) from e


def parse_config(text: str) -> RunConfig:
    """Parse the section-based configuration text into a validated RunConfig."""
    parser = ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except DuplicateOptionError as e:
        raise ConfigError(f"duplicate key '{e.option}' in [{e.section}]", line=e.lineno, field=e.option) from e
    except DuplicateSectionError as e:
        raise ConfigError(f"duplicate section [{e.section}]", line=e.lineno) from e
    except ParserError as e:
        line = getattr(e, "lineno", None)
        if line is None and getattr(e, "errors", None):
            line = e.errors[0][0]
        raise ConfigError(f"cannot parse configuration: {e.message.splitlines()[0]}", line=line) from e

    section_lines = _section_lines(text)
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", line=section_lines.get(section), field=section)
    if not parser.has_section("domain"):
        raise ConfigError("missing section [domain]", field="domain")

    lines = _line_map(text)
    data: dict = {name: {} for name in SECTIONS}
    for section in parser.sections():
        for key, raw in parser.items(section):
            value = [x.strip() for x in raw.split(",") if x.strip()] if key in LIST_KEYS else raw.strip()
            if key in TOP_LEVEL_KEYS.get(section, set()):
                data[key] = value
            else:
                data[section][key] = value
    config = validate_run_config(data, lines)
    logger.message("Finished").subject("config").details(
        domain=config.domain.kind, h=config.h, p=config.exponents()
    ).log("debug")
    return config


def read_config(path: Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def apply_overrides(
    config: RunConfig,
    p: Optional[float] = None,
    h: Optional[float] = None,
    out: Optional[Path] = None,
    experimental_p: bool = False,
) -> RunConfig:
    """Command-line flags win over the file; the merged result is validated again."""
    data = config.model_dump()
    if p is not None:
        data["p"], data["p_list"] = p, None
    if h is not None:
        data["h"] = h
    if out is not None:
        data["output"]["dir"] = out
    if experimental_p:
        data["solver"]["experimental_p"] = True
    return validate_run_config(data)
