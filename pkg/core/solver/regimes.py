# core/solver/regimes.py
"""Solve regimes of -Lap_g u = u^p with zero Dirichlet data, and p-sweeps.

    p = 0        torsion, one linear solve
    0 < p < 1    sublinear, damped normalized fixed point
    p = 1        first Dirichlet eigenpair, inverse power iteration
    p > 1        superlinear, normalized fixed point with continuation from p = 1

Both nonlinear regimes iterate on the shape w (max w = 1) and recover the amplitude from
the Nehari identity u^T K u = u^T M_rho u^p, i.e. u = s w with
s^(p-1) = w^T K w / w^T M_rho w^p.
"""
from typing import Optional
import math
import time
import numpy as np
from pydantic import BaseModel, Field

from core.config import CONFIG
from core.errors import ExperimentalExponent, LaneEmdenError, NoConvergence
from core.mesh.generator import TriangleMesh
from core.solver.assembly import Assembly, assemble
from core.solver.fields import ScalarField, SolveReport
from core.solver.linalg import LinearSolver, cg_solve, inverse_power_iteration, rayleigh_quotient
from core.utils.logging import get_logger

logger = get_logger(__name__)

EIGEN_WINDOW = 1e-6
CERTIFIED_P_MAX = 3.0
# amplitudes beyond exp(+-LOG_AMPLITUDE_LIMIT) leave double precision
LOG_AMPLITUDE_LIMIT = 700.0


class SolverOptions(BaseModel):
    tol_fix: float = Field(CONFIG.tol_fix, gt=0)
    tol_lin: float = Field(CONFIG.tol_lin, gt=0)
    tol_res: float = Field(CONFIG.tol_res, gt=0)
    max_outer: int = Field(CONFIG.max_outer, gt=0)
    damping: float = Field(CONFIG.damping, gt=0, le=1)
    continuation: bool = True
    continuation_step: float = Field(CONFIG.continuation_step, gt=0)
    experimental_p: bool = False


DEFAULT_OPTIONS = SolverOptions()


class SweepEntry(BaseModel):
    p: float
    report: Optional[SolveReport] = None
    diagnostic: Optional[float] = None     # || u_p / max u_p - u_1 ||_inf
    error: Optional[str] = None


def _positive_part_power(w: np.ndarray, p: float) -> np.ndarray:
    return np.maximum(w, 0.0) ** p


def _relative_residual(A: Assembly, u_free: np.ndarray, rhs_free: np.ndarray) -> float:
    denom = float(np.linalg.norm(rhs_free))
    return float(np.linalg.norm(A.K_free @ u_free - rhs_free)) / (denom if denom > 0 else 1.0)


def _shape(values: np.ndarray, free: np.ndarray) -> np.ndarray:
    w = np.maximum(np.asarray(values, dtype=float)[free], 0.0)
    top = w.max()
    if not top > 0:
        raise ValueError("initial guess must be positive somewhere in the interior")
    return w / top


def _amplitude_log(A: Assembly, w: np.ndarray, p: float) -> float:
    num = float(w @ (A.K_free @ w))
    den = float(w @ (A.M_rho_free @ _positive_part_power(w, p)))
    return (math.log(num) - math.log(den)) / (p - 1.0)


def _check_amplitude(log_s: float, p: float) -> None:
    if abs(log_s) > LOG_AMPLITUDE_LIMIT:
        raise NoConvergence(
            f"solution amplitude exp({log_s:.4g}) at p={p} is outside double precision; "
            "exponents this close to 1 belong to the eigen regime"
        )


def _normalized_fixed_point(
    A: Assembly, w: np.ndarray, p: float, omega: float, options: SolverOptions, linear: LinearSolver
) -> tuple[np.ndarray, int]:
    for it in range(1, options.max_outer + 1):
        y = linear.solve(A.M_rho_free @ _positive_part_power(w, p))
        y = y / y.max()
        w_next = (1.0 - omega) * w + omega * y
        update = float(np.max(np.abs(w_next - w))) / float(np.max(np.abs(w_next)))
        w = w_next
        if update < options.tol_fix:
            return w, it
    raise NoConvergence(f"fixed point at p={p} still moving after {options.max_outer} iterations (update {update:.3e})")


def _finish(
    mesh: TriangleMesh, A: Assembly, w: np.ndarray, p: float, regime: str, iterations: int,
    options: SolverOptions, started: float,
) -> tuple[ScalarField, SolveReport]:
    log_s = _amplitude_log(A, w, p)
    _check_amplitude(log_s, p)
    u_free = math.exp(log_s) * w
    rhs = A.M_rho_free @ _positive_part_power(u_free, p)
    residual = _relative_residual(A, u_free, rhs)
    if residual > options.tol_res:
        raise NoConvergence(f"discrete residual {residual:.3e} above tol_res={options.tol_res:g} at p={p}")
    u = A.extend(u_free, mesh.n_vertices)

    m_p = nehari = None
    if p > 1:
        wKw = float(w @ (A.K_free @ w))
        wMw = float(w @ (A.M_rho_free @ _positive_part_power(w, p)))
        m_p = wKw / wMw ** (2.0 / (p + 1.0))
        nehari = float(u_free @ (A.K_free @ u_free)) / float(u_free @ rhs)

    report = SolveReport(
        p=p, regime=regime, max_value=float(u.max()), iterations=iterations, residual_norm=residual,
        m_p=m_p, nehari_ratio=nehari, certified=p <= CERTIFIED_P_MAX,
        wall_time=time.perf_counter() - started,
    )
    return ScalarField(mesh=mesh, values=u, quantity="u", p=p), report


def solve_torsion(
    mesh: TriangleMesh, assembly: Optional[Assembly] = None, options: SolverOptions = DEFAULT_OPTIONS
) -> tuple[ScalarField, SolveReport]:
    started = time.perf_counter()
    A = assembly or assemble(mesh)
    b = A.weighted_load(np.ones(mesh.n_vertices))
    linear = LinearSolver(A.K_free, options.tol_lin)
    x = linear.solve(b)
    u = A.extend(x, mesh.n_vertices)
    report = SolveReport(
        p=0.0, regime="torsion", max_value=float(u.max()), iterations=linear.total_iterations,
        residual_norm=_relative_residual(A, x, b), wall_time=time.perf_counter() - started,
    )
    logger.message("Finished").subject("solve").details(
        regime="torsion", max_u=report.max_value, cg=report.iterations
    ).log("info")
    return ScalarField(mesh=mesh, values=u, quantity="u", p=0.0), report


def solve_sublinear(
    mesh: TriangleMesh,
    p: float,
    init: Optional[ScalarField] = None,
    assembly: Optional[Assembly] = None,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> tuple[ScalarField, SolveReport]:
    """Sublinear solve as a damped Picard iteration carried out on the shape of u.

    Plain Picard on u reads u <- (1 - damping) u + damping K^-1 M_rho u^p. Here the same map acts
    on w = u / max u and the amplitude s of u = s w comes from the Nehari identity at the end, so
    the iteration never has to move the amplitude. The fixed point is the same: the returned u
    satisfies K u = M_rho u^p to tol_res and is therefore left unchanged by one Picard step.
    The positive solution is unique, so any positive `init` leads to it.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"sublinear regime needs 0 <= p < 1, got {p}")
    A = assembly or assemble(mesh)
    if p == 0.0:
        return solve_torsion(mesh, A, options)
    started = time.perf_counter()
    logger.message("Starting").subject("solve").details(regime="sublinear", p=p).log("info")
    linear = LinearSolver(A.K_free, options.tol_lin)
    w0 = _shape(init.values, A.free) if init is not None else _shape(solve_torsion(mesh, A, options)[0].values, A.free)
    w, iterations = _normalized_fixed_point(A, w0, p, options.damping, options, linear)
    field, report = _finish(mesh, A, w, p, "sublinear", iterations, options, started)
    logger.message("Finished").subject("solve").details(
        regime="sublinear", p=p, max_u=report.max_value, iterations=iterations
    ).log("info")
    return field, report


def solve_eigen(
    mesh: TriangleMesh, assembly: Optional[Assembly] = None, options: SolverOptions = DEFAULT_OPTIONS
) -> tuple[float, ScalarField, SolveReport]:
    started = time.perf_counter()
    A = assembly or assemble(mesh)
    x0 = cg_solve(A.K_free, A.weighted_load(np.ones(mesh.n_vertices)), options.tol_lin)
    lam, x, iterations = inverse_power_iteration(A.K_free, A.M_rho_free, x0, max_iter=options.max_outer)
    # sign so that the maximum is positive, then max = 1
    x = x if x.max() >= -x.min() else -x
    x = x / x.max()
    lam = rayleigh_quotient(A.K_free, A.M_rho_free, x)
    residual = _relative_residual(A, x, lam * (A.M_rho_free @ x))
    u1 = A.extend(x, mesh.n_vertices)
    report = SolveReport(
        p=1.0, regime="eigen", max_value=1.0, iterations=iterations, residual_norm=residual,
        lambda_=lam, wall_time=time.perf_counter() - started,
    )
    logger.message("Finished").subject("eigen").details(lam=lam, iterations=iterations).log("info")
    field = ScalarField(mesh=mesh, values=u1, quantity="eigenfunction", p=1.0, normalization="max=1", eigenvalue=lam)
    return lam, field, report


def _continuation_path(start: float, target: float, step: float) -> list[float]:
    n = max(1, math.ceil(abs(target - start) / step - 1e-12))
    return [start + (target - start) * k / n for k in range(1, n + 1)]


def solve_superlinear(
    mesh: TriangleMesh,
    p: float,
    continuation: Optional[bool] = None,
    init: Optional[ScalarField] = None,
    assembly: Optional[Assembly] = None,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> tuple[ScalarField, SolveReport]:
    """Superlinear solve; `init` (a shape at exponent init.p, default the eigenfunction at p=1)
    is the start of the continuation path."""
    if not p > 1.0:
        raise ValueError(f"superlinear regime needs p > 1, got {p}")
    if p > CERTIFIED_P_MAX and not options.experimental_p:
        raise ExperimentalExponent(f"p={p} > {CERTIFIED_P_MAX} requires the experimental flag")
    continuation = options.continuation if continuation is None else continuation
    started = time.perf_counter()
    A = assembly or assemble(mesh)
    if init is None:
        _, init, _ = solve_eigen(mesh, A, options)
    start_p = init.p if init.p is not None and init.p >= 1.0 else 1.0
    w = _shape(init.values, A.free)
    path = _continuation_path(start_p, p, options.continuation_step) if continuation else [p]

    linear = LinearSolver(A.K_free, options.tol_lin)
    total = 0
    for stage_p in path:
        w, iterations = _normalized_fixed_point(A, w, stage_p, 1.0, options, linear)
        total += iterations
        logger.message("Processing").subject("solve").details(
            regime="superlinear", stage_p=stage_p, iterations=iterations
        ).log("debug")
    field, report = _finish(mesh, A, w, p, "superlinear", total, options, started)
    if not report.certified:
        logger.message("Finished").subject("solve").details(p=p, certified=False).log("warning")
    logger.message("Finished").subject("solve").details(
        regime="superlinear", p=p, max_u=report.max_value, m_p=report.m_p, stages=len(path)
    ).log("info")
    return field, report


def solve(
    mesh: TriangleMesh,
    p: float,
    assembly: Optional[Assembly] = None,
    options: SolverOptions = DEFAULT_OPTIONS,
    init: Optional[ScalarField] = None,
) -> tuple[ScalarField, SolveReport]:
    """Dispatch on the exponent."""
    if p < 0:
        raise ValueError(f"exponent must be non-negative, got {p}")
    A = assembly or assemble(mesh)
    if p == 0.0:
        return solve_torsion(mesh, A, options)
    if abs(p - 1.0) <= EIGEN_WINDOW:
        _, field, report = solve_eigen(mesh, A, options)
        return field, report
    if p < 1.0:
        return solve_sublinear(mesh, p, init, A, options)
    return solve_superlinear(mesh, p, init=init, assembly=A, options=options)


def eigen_distance(u: ScalarField, u1: ScalarField) -> float:
    """|| u / max u - u_1 ||_inf with u_1 normalized to max 1."""
    return float(np.max(np.abs(u.values / u.values.max() - u1.values)))


def sweep_p(
    mesh: TriangleMesh,
    p_list: list[float],
    assembly: Optional[Assembly] = None,
    options: SolverOptions = DEFAULT_OPTIONS,
) -> list[SweepEntry]:
    """Solve every p in order, warm-starting each side of p = 1 from its previous solution."""
    A = assembly or assemble(mesh)
    _, u1, _ = solve_eigen(mesh, A, options)
    previous: dict[str, Optional[ScalarField]] = {"sub": None, "super": u1}
    entries: list[SweepEntry] = []
    for p in p_list:
        try:
            if abs(p - 1.0) <= EIGEN_WINDOW:
                _, field, report = solve_eigen(mesh, A, options)
                entries.append(SweepEntry(p=p, report=report, diagnostic=0.0))
                continue
            side = "sub" if p < 1.0 else "super"
            field, report = solve(mesh, p, A, options, previous[side])
            previous[side] = field
            entries.append(SweepEntry(p=p, report=report, diagnostic=eigen_distance(field, u1)))
        except (LaneEmdenError, ValueError) as e:
            logger.message("Error").subject("sweep").details(p=p, error=str(e)).log("error")
            entries.append(SweepEntry(p=p, error=f"{type(e).__name__}: {e}"))
    logger.message("Finished").subject("sweep").details(
        count=len(entries), failed=sum(e.error is not None for e in entries)
    ).log("info")
    return entries


def sweep_monotone(entries: list[SweepEntry]) -> dict[str, bool]:
    """D(p) must shrink as p approaches 1 from either side."""
    sub = sorted((e.p, e.diagnostic) for e in entries if e.diagnostic is not None and e.p < 1.0 - EIGEN_WINDOW)
    sup = sorted((e.p, e.diagnostic) for e in entries if e.diagnostic is not None and e.p > 1.0 + EIGEN_WINDOW)
    return {
        "sub": all(a[1] > b[1] for a, b in zip(sub, sub[1:])),
        "super": all(a[1] < b[1] for a, b in zip(sup, sup[1:])),
    }
