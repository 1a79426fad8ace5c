# core/verify/critical.py
from typing import Optional
import numpy as np

from core.config import CONFIG
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.verify.hessian import HessianField, covariant_hessian
from core.verify.report import CriticalPoint

logger = get_logger(__name__)

C_CRIT = 4.0


def _classify(lo: float, hi: float, eps: float) -> str:
    if hi < -eps:
        return "max"
    if lo > eps:
        return "min"
    if lo < -eps and hi > eps:
        return "saddle"
    return "degenerate"


def critical_points(
    mesh: TriangleMesh,
    u: ScalarField,
    hessian: Optional[HessianField] = None,
    c_crit: float = C_CRIT,
    epsilon_scale: float = CONFIG.epsilon_def_scale,
    fit_degree: int = 3,
) -> list[CriticalPoint]:
    """Interior critical points of u: strict local minima of the fitted |grad u| below
    c_crit * h * max|grad u|, moved by one Newton step and classified by the Hessian of u."""
    hessian = hessian or covariant_hessian(mesh, u, fit_degree)
    norm = hessian.grad_norm
    interior = hessian.valid & ~mesh.boundary_mask
    eta = c_crit * mesh.h * float(np.nanmax(norm[hessian.valid]))
    lo, hi = hessian.eigenvalues()
    eps = epsilon_scale * float(np.nanmax(np.maximum(np.abs(lo), np.abs(hi))[interior]))

    candidates = []
    for i in np.flatnonzero(interior & (norm < eta)):
        nbrs = mesh.neighbors(i)
        nbrs = nbrs[hessian.valid[nbrs]]
        if np.all(norm[i] < norm[nbrs]):
            candidates.append(int(i))

    points: list[tuple[np.ndarray, int]] = []
    for i in sorted(candidates, key=lambda k: norm[k]):
        q = mesh.vertices[i].copy()
        if hessian.chart_hessian is not None:
            hxx, hxy, hyy = hessian.chart_hessian[i]
            H = np.array([[hxx, hxy], [hxy, hyy]])
            if abs(np.linalg.det(H)) > 0:
                step = -np.linalg.solve(H, hessian.chart_gradient[i])
                if np.linalg.norm(step) <= 2 * mesh.h:
                    q = q + step
        if all(np.linalg.norm(q - other) > 2 * mesh.h for other, _ in points):
            points.append((q, i))

    result = [
        CriticalPoint(
            location=(float(q[0]), float(q[1])),
            grad_norm=float(norm[i]),
            hessian_eigs=(float(lo[i]), float(hi[i])),
            type=_classify(float(lo[i]), float(hi[i]), eps),
        )
        for q, i in points
    ]
    logger.message("Finished").subject("verify").details(
        critical=len(result), types=[c.type for c in result]
    ).log("debug")
    return result
