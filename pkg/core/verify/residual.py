# core/verify/residual.py
"""Pointwise residuals of the solved equation and of the equation satisfied by v.

For v = u^((1-p)/2):   Lap v = (1/v) ( -(1+p)/(1-p) |grad v|^2 - (1-p)/2 )
For v = log u (p = 1): Lap v = -lambda - |grad v|^2
"""
from typing import Optional
import numpy as np

from core.errors import EmptyInterior
from core.mesh.boundary import boundary_distance
from core.solver.fields import ScalarField
from core.verify.hessian import HessianField, HessianMode, covariant_hessian, hessian_of_transform, transform_exponent
from core.verify.report import Residuals


def _relative_l2(lhs: np.ndarray, rhs: np.ndarray) -> float:
    denom = float(np.linalg.norm(rhs))
    return float(np.linalg.norm(lhs - rhs)) / (denom if denom > 0 else 1.0)


def pde_residual(
    u: ScalarField,
    p: float,
    exclusion_margin: Optional[float] = None,
    hessian_mode: HessianMode = "chain",
    fit_degree: int = 3,
    hess_u: Optional[HessianField] = None,
    distance: Optional[ScalarField] = None,
) -> Residuals:
    mesh = u.mesh
    margin = 3.0 * mesh.h if exclusion_margin is None else exclusion_margin
    distance = distance or boundary_distance(mesh)
    hess_u = hess_u or covariant_hessian(mesh, u, fit_degree)
    v, hess_v = hessian_of_transform(u, p, hessian_mode, fit_degree, hess_u)

    alpha = transform_exponent(p)
    lam = u.eigenvalue
    if alpha is None and lam is None:
        raise ValueError("the logarithmic identity needs the eigenvalue carried by u")

    included = (distance.values >= margin) & hess_u.valid & hess_v.valid & ~mesh.boundary_mask
    included &= np.isfinite(hess_v.A)
    if not included.any():
        raise EmptyInterior(f"no vertex left after excluding a margin of {margin:g}")

    uu = u.values[included]
    source = lam * uu if alpha is None else uu ** p
    primal = _relative_l2(hess_u.trace[included], -source)

    lap_v = hess_v.trace[included]
    grad2 = np.sum(hess_v.grad[included] ** 2, axis=1)
    if alpha is None:
        rhs = -lam - grad2
    else:
        rhs = (-(1.0 + p) / (1.0 - p) * grad2 - 0.5 * (1.0 - p)) / v.values[included]
    return Residuals(pde_residual_L2=primal, deltav_residual_L2=_relative_l2(lap_v, rhs))
