# core/verify/report.py
from typing import Literal, Optional
import numpy as np
from pydantic import BaseModel, Field

from core.config import CONFIG
from core.errors import EmptyInterior
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.verify.hessian import HessianField

logger = get_logger(__name__)

SCHEMA_VERSION = "1"

Definiteness = Literal["negative_definite", "positive_definite", "indefinite", "semidefinite_marginal"]
CriticalType = Literal["max", "saddle", "min", "degenerate"]


class RankSummary(BaseModel):
    rank0: int = 0
    rank1: int = 0
    rank2: int = 0


class DefinitenessResult(BaseModel):
    definiteness: Definiteness
    min_abs_eig: float
    min_abs_phi: float
    epsilon_def: float
    rank_field_summary: RankSummary
    included: int
    trace_min: float
    trace_max: float


class LevelSetResult(BaseModel):
    c: float
    fraction: Optional[float] = None
    min_kappa_g: float
    convex: bool
    samples: int
    loops: int = 1


class CriticalPoint(BaseModel):
    location: tuple[float, float]
    grad_norm: float
    hessian_eigs: tuple[float, float]
    type: CriticalType


class BoundaryLayerResult(BaseModel):
    delta: float
    band_size: int
    a0: float
    kappa0: float
    u_tautau_max: float
    u_etaeta_min: float
    v_definite: bool
    u_tautau_negative: bool
    u_etaeta_positive: bool
    # the normal second derivative has a guaranteed sign only for p > 1
    u_etaeta_enforced: bool
    tautau_margin: float
    etaeta_margin: float
    passed: bool


class Residuals(BaseModel):
    pde_residual_L2: float
    deltav_residual_L2: float


class DualityResult(BaseModel):
    c: float
    agree: bool
    mismatches: int


class ProbeResult(BaseModel):
    seed: int
    samples: int
    violations: int
    worst: float


class VerificationReport(BaseModel):
    schema_version: str = SCHEMA_VERSION
    p: float
    transform: Literal["power", "log"]
    certified: bool = True
    expected: Definiteness
    definiteness: Definiteness
    min_abs_eig: float
    min_abs_phi: float
    epsilon_def: float
    rank_field_summary: RankSummary
    trace_sign_ok: bool
    level_set_results: list[LevelSetResult] = Field(default_factory=list)
    critical_points: list[CriticalPoint] = Field(default_factory=list)
    boundary_layer: Optional[BoundaryLayerResult] = None
    residuals: Optional[Residuals] = None
    log_concavity: Optional[Definiteness] = None
    duality: list[DualityResult] = Field(default_factory=list)
    direction_probe: Optional[ProbeResult] = None
    verdicts: dict[str, bool] = Field(default_factory=dict)
    passed: bool = False


def definiteness_report(
    hessian: HessianField,
    distance: ScalarField,
    exclusion_margin: float,
    epsilon_scale: float = CONFIG.epsilon_def_scale,
) -> DefinitenessResult:
    """Classify the Hessian field over vertices at least `exclusion_margin` from the boundary."""
    included = hessian.valid & (distance.values >= exclusion_margin) & np.isfinite(hessian.A)
    if not included.any():
        raise EmptyInterior(f"no vertex left after excluding a margin of {exclusion_margin:g}")
    A, B, C = hessian.A[included], hessian.B[included], hessian.C[included]
    lo, hi = hessian.eigenvalues()
    lo, hi = lo[included], hi[included]
    phi = A * C - B ** 2
    trace = A + C
    eps = epsilon_scale * float(np.max(np.maximum(np.abs(lo), np.abs(hi))))
    eps2 = eps ** 2

    if np.all(trace < -eps) and np.all(phi > eps2):
        verdict = "negative_definite"
    elif np.all(trace > eps) and np.all(phi > eps2):
        verdict = "positive_definite"
    elif np.all(phi >= -eps2) and (np.all(trace <= eps) or np.all(trace >= -eps)):
        verdict = "semidefinite_marginal"
    else:
        verdict = "indefinite"

    rank2 = np.abs(phi) > eps2
    rank1 = ~rank2 & (np.abs(trace) > eps)
    result = DefinitenessResult(
        definiteness=verdict,
        min_abs_eig=float(np.min(np.minimum(np.abs(lo), np.abs(hi)))),
        min_abs_phi=float(np.min(np.abs(phi))),
        epsilon_def=eps,
        rank_field_summary=RankSummary(
            rank0=int(np.sum(~rank2 & ~rank1)), rank1=int(np.sum(rank1)), rank2=int(np.sum(rank2))
        ),
        included=int(included.sum()),
        trace_min=float(trace.min()),
        trace_max=float(trace.max()),
    )
    logger.message("Finished").subject("verify").details(
        definiteness=verdict, included=result.included, min_abs_phi=result.min_abs_phi
    ).log("debug")
    return result
