# core/verify/engine.py
"""Full verification of one solved field against the power concavity/convexity statements."""
from typing import Optional
import numpy as np
from pydantic import BaseModel, Field

from core.config import CONFIG
from core.errors import LaneEmdenError
from core.geometry.stereo import ConvexityVerdict
from core.mesh.boundary import boundary_distance
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.verify.critical import C_CRIT, critical_points
from core.verify.hessian import (
    HessianField, HessianMode, chain_rule_hessian, covariant_hessian, hessian_of_transform, transform_exponent,
)
from core.verify.layer import boundary_layer_check
from core.verify.levels import level_results, level_set_duality
from core.verify.report import Definiteness, ProbeResult, VerificationReport, definiteness_report
from core.verify.residual import pde_residual

logger = get_logger(__name__)

DEFAULT_LEVEL_FRACTIONS = [0.1, 0.25, 0.5, 0.75, 0.9]


class VerifySettings(BaseModel):
    exclusion_margin: Optional[float] = Field(None, gt=0)   # None: 3h
    delta: float = Field(0.15, gt=0)
    level_fractions: list[float] = Field(default_factory=lambda: list(DEFAULT_LEVEL_FRACTIONS))
    epsilon_def_scale: float = Field(CONFIG.epsilon_def_scale, gt=0)
    hessian_mode: HessianMode = "chain"
    fit_degree: int = Field(3, ge=2, le=3)
    c_crit: float = Field(C_CRIT, gt=0)
    boundary_layer: bool = True
    probe_samples: int = Field(20, ge=0)


def expected_definiteness(p: float) -> Definiteness:
    return "positive_definite" if p > 1 and transform_exponent(p) is not None else "negative_definite"


def direction_probe(
    hessian: HessianField,
    included: np.ndarray,
    expected: Definiteness,
    seed: int,
    samples: int = 20,
) -> ProbeResult:
    """Hess v(w, w) at random included vertices along random unit directions must carry the
    expected sign."""
    rng = np.random.default_rng(seed)
    pool = np.flatnonzero(included)
    if samples == 0 or len(pool) == 0:
        return ProbeResult(seed=seed, samples=0, violations=0, worst=0.0)
    idx = rng.choice(pool, size=min(samples, len(pool)), replace=False)
    angle = rng.uniform(0.0, 2 * np.pi, size=len(idx))
    w = np.stack([np.cos(angle), np.sin(angle)], axis=1)
    values = hessian.quadratic_form(w, idx)
    signed = -values if expected == "negative_definite" else values
    return ProbeResult(seed=seed, samples=len(idx), violations=int(np.sum(signed <= 0)), worst=float(signed.min()))


def log_concavity(
    u: ScalarField, hess_u: HessianField, distance: ScalarField, margin: float, epsilon_scale: float
) -> Definiteness:
    """Definiteness of Hess(-log u) over the included vertices."""
    h = chain_rule_hessian(u, hess_u, None)
    neg = h.model_copy(update={"A": -h.A, "B": -h.B, "C": -h.C})
    return definiteness_report(neg, distance, margin, epsilon_scale).definiteness


def verify_solution(
    u: ScalarField,
    p: float,
    settings: VerifySettings = VerifySettings(),
    seed: int = 0,
    convexity: Optional[ConvexityVerdict] = None,
    certified: bool = True,
) -> VerificationReport:
    mesh: TriangleMesh = u.mesh
    margin = settings.exclusion_margin if settings.exclusion_margin is not None else 3.0 * mesh.h
    logger.message("Starting").subject("verify").details(p=p, margin=margin, mode=settings.hessian_mode).log("info")

    distance = boundary_distance(mesh)
    hess_u = covariant_hessian(mesh, u, settings.fit_degree)
    v, hess_v = hessian_of_transform(u, p, settings.hessian_mode, settings.fit_degree, hess_u)
    definite = definiteness_report(hess_v, distance, margin, settings.epsilon_def_scale)
    expected = expected_definiteness(p)
    included = hess_v.valid & (distance.values >= margin) & np.isfinite(hess_v.A)

    trace = hess_v.trace[included]
    trace_ok = bool(np.all(trace > 0)) if expected == "positive_definite" else bool(np.all(trace < 0))

    levels = level_results(mesh, u, settings.level_fractions, hess_u)
    top = float(u.values.max())
    duality = [level_set_duality(u, v, p, f * top) for f in settings.level_fractions]
    crit = critical_points(mesh, u, hess_u, settings.c_crit, settings.epsilon_def_scale)

    layer = None
    if settings.boundary_layer:
        layer = boundary_layer_check(mesh, u, p, settings.delta, hess_u, hess_v, distance)

    residuals = None
    if transform_exponent(p) is not None or u.eigenvalue is not None:
        residuals = pde_residual(u, p, margin, settings.hessian_mode, settings.fit_degree, hess_u, distance)

    probe = direction_probe(hess_v, included, expected, seed, settings.probe_samples)
    try:
        log_def = log_concavity(u, hess_u, distance, margin, settings.epsilon_def_scale)
    except LaneEmdenError:
        log_def = None

    if convexity == "convex_marginal":
        definiteness_ok = definite.definiteness in (expected, "semidefinite_marginal")
        rank_ok = True
    else:
        definiteness_ok = definite.definiteness == expected
        rank_ok = definite.rank_field_summary.rank0 == 0 and definite.rank_field_summary.rank1 == 0
    verdicts = {
        "definiteness": definiteness_ok,
        "constant_rank": rank_ok,
        "trace_sign": trace_ok,
        "level_sets_convex": all(r.convex for r in levels),
        "unique_max": len(crit) == 1 and crit[0].type == "max",
        "duality": all(d.agree for d in duality),
        "direction_probe": probe.violations == 0,
    }
    if layer is not None:
        verdicts["boundary_layer"] = layer.passed

    report = VerificationReport(
        p=p,
        transform="log" if transform_exponent(p) is None else "power",
        certified=certified,
        expected=expected,
        definiteness=definite.definiteness,
        min_abs_eig=definite.min_abs_eig,
        min_abs_phi=definite.min_abs_phi,
        epsilon_def=definite.epsilon_def,
        rank_field_summary=definite.rank_field_summary,
        trace_sign_ok=trace_ok,
        level_set_results=levels,
        critical_points=crit,
        boundary_layer=layer,
        residuals=residuals,
        log_concavity=log_def,
        duality=duality,
        direction_probe=probe,
        verdicts=verdicts,
        passed=all(verdicts.values()),
    )
    failed = [k for k, ok in verdicts.items() if not ok]
    logger.message("Finished").subject("verify").details(
        p=p, definiteness=report.definiteness, passed=report.passed, failed=failed
    ).log("info" if report.passed else "warning")
    return report
