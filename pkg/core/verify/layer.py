# core/verify/layer.py
"""Sign structure of u and v in the boundary band Omega_delta.

Near a uniformly convex boundary, with a0 = min u_eta on the boundary and kappa0 = min
boundary curvature, u_tautau ~ -kappa0 a0 < 0 and, for p > 1, u_etaeta ~ kappa0 a0 > 0.
Every band vertex is checked in the frame of the geodesic running to its nearest boundary
vertex.
"""
from typing import Optional
import numpy as np

from core.errors import LayerTooThin
from core.geometry.stereo import boundary_curvature_array, lift_jacobian, rho_squared
from core.mesh.boundary import boundary_distance, sphere_distance_to
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.verify.hessian import HessianField, covariant_hessian, transform_hessian
from core.verify.report import BoundaryLayerResult

logger = get_logger(__name__)

MIN_BAND = 10
MAX_INRADIUS_FRACTION = 0.5


def band_frames(mesh: TriangleMesh, band: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal-frame (tau, eta) at band vertices; eta points away from the nearest
    boundary vertex along the connecting great circle."""
    x = mesh.chart_sphere_points[band]
    targets = mesh.chart_sphere_points[mesh.boundary_vertices]
    _, nearest = sphere_distance_to(x, targets)
    y = targets[nearest]
    toward = y - np.sum(x * y, axis=1)[:, None] * x
    J = lift_jacobian(mesh.vertices[band])
    rho = np.sqrt(rho_squared(mesh.vertices[band]))
    # columns of J are orthogonal with length rho
    n = np.einsum("nij,ni->nj", J, toward) / rho[:, None]
    n = n / np.linalg.norm(n, axis=1)[:, None]
    eta = -n
    tau = np.stack([-eta[:, 1], eta[:, 0]], axis=1)
    return tau, eta


def boundary_layer_check(
    mesh: TriangleMesh,
    u: ScalarField,
    p: float,
    delta: float,
    hess_u: Optional[HessianField] = None,
    hess_v: Optional[HessianField] = None,
    distance: Optional[ScalarField] = None,
    fit_degree: int = 3,
) -> BoundaryLayerResult:
    distance = distance or boundary_distance(mesh)
    inradius = float(distance.values.max())
    if delta > MAX_INRADIUS_FRACTION * inradius:
        logger.message("Processing").subject("verify").details(
            delta=delta, clipped=MAX_INRADIUS_FRACTION * inradius
        ).log("warning")
        delta = MAX_INRADIUS_FRACTION * inradius
    if delta < 3 * mesh.h:
        raise LayerTooThin(f"delta={delta:g} is below 3h={3 * mesh.h:g}")
    hess_u = hess_u or covariant_hessian(mesh, u, fit_degree)
    hess_v = hess_v or transform_hessian(u, hess_u, p)

    d = distance.values
    band = np.flatnonzero((d >= 2 * mesh.h) & (d <= delta) & hess_u.valid & hess_v.valid)
    if len(band) < MIN_BAND:
        raise LayerTooThin(f"band [2h, {delta:g}] holds {len(band)} vertices, need {MIN_BAND}")

    bv = mesh.boundary_vertices
    if not np.all(hess_u.valid[bv]):
        raise LayerTooThin("u has no derivative fit on some boundary vertices")
    u_eta = np.sum(hess_u.grad[bv] * -mesh.boundary_nu_E, axis=1)
    a0 = float(u_eta.min())
    kappa0 = float(boundary_curvature_array(mesh.vertices[bv], mesh.boundary_kappa_E, mesh.boundary_nu_E).min())
    scale = 0.5 * kappa0 * a0

    tau, eta = band_frames(mesh, band)
    u_tt = hess_u.quadratic_form(tau, band)
    u_nn = hess_u.quadratic_form(eta, band)
    lo, hi = hess_v.eigenvalues()
    if p > 1:
        v_definite = bool(np.all(lo[band] > 0))
    else:
        v_definite = bool(np.all(hi[band] < 0))

    tt_negative = bool(np.all(u_tt < 0))
    nn_positive = bool(np.all(u_nn > 0))
    enforced = p > 1
    passed = v_definite and tt_negative and (nn_positive or not enforced)
    denom = scale if scale > 0 else 1.0
    result = BoundaryLayerResult(
        delta=float(delta),
        band_size=int(len(band)),
        a0=a0,
        kappa0=kappa0,
        u_tautau_max=float(u_tt.max()),
        u_etaeta_min=float(u_nn.min()),
        v_definite=v_definite,
        u_tautau_negative=tt_negative,
        u_etaeta_positive=nn_positive,
        u_etaeta_enforced=enforced,
        tautau_margin=float(-u_tt.max() / denom),
        etaeta_margin=float(u_nn.min() / denom),
        passed=passed,
    )
    logger.message("Finished").subject("verify").details(
        layer=delta, band=result.band_size, a0=a0, kappa0=kappa0, passed=passed
    ).log("info" if passed else "warning")
    return result
