# core/cli/commands.py
import sys
from pathlib import Path
from typing import Callable, Optional
import click
from pydantic import BaseModel, Field

from core.cli.settings import RunConfig, apply_overrides, read_config
from core.errors import ConfigError, DomainMismatch, LaneEmdenError, NotConvex
from core.geometry.stereo import ConvexityVerdict, check_uniform_convexity
from core.data.storage import (
    output_lock, save_field_csv, save_json, save_level_csv, save_radial_csv, save_text, write_mesh,
)
from core.mesh.domain import GeodesicBall, planarize
from core.mesh.generator import TriangleMesh, generate_mesh
from core.oracle.radial import compare, radial_shoot, torsion_closed_form
from core.solver.assembly import assemble
from core.solver.regimes import SweepEntry, solve, solve_eigen, sweep_monotone, sweep_p
from core.utils.functional import keyword, pipeline
from core.utils.logging import LogAnalyzer, get_logger, set_console_level
from core.verify.engine import verify_solution
from core.verify.hessian import covariant_hessian
from core.verify.levels import level_curvature
from core.verify.report import SCHEMA_VERSION

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2
EXIT_CONFIG = 64


class SweepReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    entries: list[SweepEntry]
    monotone: dict[str, bool]
    passed: bool


class OracleComparison(BaseModel):
    p: float
    R: float
    lambda_fem: Optional[float] = None
    lambda_radial: Optional[float] = None
    center_value: float
    sup_err: float
    l2_err: float
    rel_sup_err: float


class OracleReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    comparisons: list[OracleComparison] = Field(default_factory=list)


def gate_domain(config: RunConfig) -> ConvexityVerdict:
    """Refuse domains that are not geodesically convex before any mesh is built."""
    report = check_uniform_convexity(config.domain.to_spec(), config.domain.n_boundary)
    if report.verdict == "not_convex":
        raise NotConvex(f"boundary curvature reaches {report.kappa_min:.6g} < 0")
    return report.verdict


def build_mesh(config: RunConfig) -> TriangleMesh:
    return pipeline(config.domain.to_spec(), [
        keyword(planarize, n_boundary=config.domain.n_boundary),
        keyword(generate_mesh, h=config.h),
    ])


def _single_p(config: RunConfig) -> float:
    ps = config.exponents()
    if len(ps) != 1:
        raise ConfigError("this command needs exactly one exponent p", field="solver.p")
    return ps[0]


def run_mesh(config: RunConfig) -> int:
    gate_domain(config)
    write_mesh(build_mesh(config), "mesh.txt", config.output.dir)
    return EXIT_OK


def run_solve(config: RunConfig) -> int:
    p = _single_p(config)
    gate_domain(config)
    mesh = build_mesh(config)
    u, report = solve(mesh, p, options=config.solver)
    save_field_csv(u, "field.csv", config.output.dir)
    save_json(report, "solve.json", config.output.dir)
    return EXIT_OK


def run_eigen(config: RunConfig) -> int:
    gate_domain(config)
    mesh = build_mesh(config)
    _, u1, report = solve_eigen(mesh, options=config.solver)
    save_field_csv(u1, "eigen.csv", config.output.dir)
    save_json(report, "eigen.json", config.output.dir)
    return EXIT_OK


def run_verify(config: RunConfig) -> int:
    p = _single_p(config)
    verdict = gate_domain(config)
    mesh = build_mesh(config)
    u, solved = solve(mesh, p, options=config.solver)
    report = verify_solution(u, p, config.verify, config.seed, verdict, solved.certified)
    out = config.output.dir
    save_field_csv(u, "field.csv", out)
    save_json(solved, "solve.json", out)
    save_json(report, "verification.json", out)

    hess_u = covariant_hessian(mesh, u, config.verify.fit_degree)
    top = float(u.values.max())
    curves = []
    for fraction in config.verify.level_fractions:
        try:
            curves.append(level_curvature(mesh, u, fraction * top, hess_u))
        except LaneEmdenError as e:
            logger.message("Error").subject("verify").details(fraction=fraction, error=str(e)).log("warning")
    save_level_csv(curves, "levels.csv", out)
    return EXIT_OK if report.passed else EXIT_VERDICT


def run_sweep(config: RunConfig) -> int:
    ps = config.exponents()
    if not ps:
        raise ConfigError("sweep needs p_list", field="solver.p_list")
    gate_domain(config)
    mesh = build_mesh(config)
    entries = sweep_p(mesh, ps, options=config.solver)
    monotone = sweep_monotone(entries)
    report = SweepReport(entries=entries, monotone=monotone, passed=all(monotone.values()))
    save_json(report, "sweep.json", config.output.dir)
    if any(e.error is not None for e in entries):
        return EXIT_ERROR
    return EXIT_OK if report.passed else EXIT_VERDICT


def run_oracle(config: RunConfig) -> int:
    spec = config.domain.to_spec()
    if not isinstance(spec, GeodesicBall):
        raise DomainMismatch("radial oracles exist only for geodesic balls")
    ps = config.exponents() or [0.0]
    gate_domain(config)
    mesh = build_mesh(config)
    A = assemble(mesh)
    out = config.output.dir
    report = OracleReport()
    for p in ps:
        radial = torsion_closed_form(spec.radius) if p == 0.0 else radial_shoot(spec.radius, p)
        u, solved = solve(mesh, p, A, config.solver)
        errors = compare(u, radial)
        save_radial_csv(radial, f"radial_p{p:g}.csv", out)
        save_field_csv(u, f"field_p{p:g}.csv", out)
        report.comparisons.append(OracleComparison(
            p=p, R=spec.radius, lambda_fem=solved.lambda_, lambda_radial=radial.lambda_,
            center_value=float(radial.values[0]), **errors,
        ))
    save_json(report, "oracle.json", out)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "mesh": run_mesh,
    "solve": run_solve,
    "eigen": run_eigen,
    "verify": run_verify,
    "sweep": run_sweep,
    "oracle": run_oracle,
}


def run(command: str, config: RunConfig, inputs: Optional[dict[str, str]] = None) -> int:
    """Execute one subcommand and map its outcome to the exit-code contract.

    `inputs` maps file names to text written into the output directory once the lock is held.
    """
    logger.message("Starting").subject("method").details(command=command, out=str(config.output.dir)).log("info")
    try:
        with output_lock(config.output.dir) as out:
            for filename, text in (inputs or {}).items():
                save_text(text, filename, out)
            code = COMMANDS[command](config)
    except ConfigError as e:
        logger.message("Error").subject("config").details(error=str(e)).log("error")
        code = EXIT_CONFIG
    except (LaneEmdenError, OSError, ValueError) as e:
        logger.message("Error").subject("method").details(error=f"{type(e).__name__}: {e}").log("error")
        code = EXIT_ERROR
    logger.message("Finished").subject("method").details(command=command, exit=code).log("info")
    logger.message("Finished").subject("method").details(stats=LogAnalyzer.get_stats()).log("debug")
    return code


def load(
    config_path: Optional[Path],
    p: Optional[float],
    h: Optional[float],
    out: Optional[Path],
    experimental_p: bool,
) -> RunConfig:
    if config_path is None:
        raise ConfigError("--config is required", field="config")
    return apply_overrides(read_config(config_path), p=p, h=h, out=out, experimental_p=experimental_p)


def run_options(func):
    """Flags shared by every run subcommand."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="Run configuration file"),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory"),
        click.option("--p", "p", type=float, default=None, help="Exponent, overrides the configuration"),
        click.option("--h", "h", type=float, default=None, help="Mesh size, overrides the configuration"),
        click.option("--quiet", is_flag=True, help="Only warnings and errors on the console"),
        click.option("--experimental-p", is_flag=True, help="Allow p > 3"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _dispatch(command: str, config_path, out, p, h, quiet, experimental_p) -> None:
    if quiet:
        set_console_level("WARNING")
    try:
        config = load(config_path, p, h, out, experimental_p)
    except ConfigError as e:
        logger.message("Error").subject("config").details(error=str(e)).log("error")
        sys.exit(EXIT_CONFIG)
    except OSError as e:
        logger.message("Error").subject("config").details(error=str(e)).log("error")
        sys.exit(EXIT_ERROR)
    sys.exit(run(command, config))


@click.group()
def cli():
    """Lane-Emden laboratory on convex domains of the 2-sphere."""
    pass


@cli.command()
@run_options
def mesh(**kwargs) -> None:
    """Mesh the domain and write the mesh text file."""
    _dispatch("mesh", **kwargs)


@cli.command("solve")
@run_options
def solve_command(**kwargs) -> None:
    """Solve for one exponent; writes field.csv and solve.json."""
    _dispatch("solve", **kwargs)


@cli.command()
@run_options
def eigen(**kwargs) -> None:
    """First Dirichlet eigenpair; writes eigen.csv and eigen.json."""
    _dispatch("eigen", **kwargs)


@cli.command()
@run_options
def verify(**kwargs) -> None:
    """Solve and verify; exit 2 when a verdict fails."""
    _dispatch("verify", **kwargs)


@cli.command()
@run_options
def sweep(**kwargs) -> None:
    """Solve every p of p_list with the distance D(p) to the eigenfunction."""
    _dispatch("sweep", **kwargs)


@cli.command()
@run_options
def oracle(**kwargs) -> None:
    """Radial solutions on a geodesic ball compared with the mesh solutions."""
    _dispatch("oracle", **kwargs)


@cli.command()
@click.argument("name")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory")
@click.option("--quiet", is_flag=True, help="Only warnings and errors on the console")
def recipe(name: str, out: Optional[Path], quiet: bool) -> None:
    """Run a canned reproduction recipe by name."""
    from core.cli.recipes import RECIPES, recipe_config

    if quiet:
        set_console_level("WARNING")
    if name not in RECIPES:
        click.echo(f"Unknown recipe: {name}. Available: {', '.join(sorted(RECIPES))}")
        sys.exit(EXIT_CONFIG)
    try:
        command, config, text = recipe_config(name, out)
    except ConfigError as e:
        logger.message("Error").subject("config").details(error=str(e)).log("error")
        sys.exit(EXIT_CONFIG)
    sys.exit(run(command, config, inputs={f"{name}.ini": text}))


if __name__ == "__main__":
    cli()
