# core/oracle/radial.py
"""Radial ground truth on geodesic balls of S^2.

A radial u(r) solves u'' + cot(r) u' + f(u) = 0 with u'(0) = 0 and u(R) = 0. Writing
u = m w with w(0) = 1 turns f(u) = u^p into mu w^p with mu = m^(p-1) (mu = lambda at p = 1),
so every regime is a one-parameter shooting problem in mu for a profile starting at 1.
"""
from functools import cached_property
from typing import Optional
import math
import numpy as np
from pydantic import ConfigDict, Field
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from core.errors import DomainMismatch, ShootingFailed
from core.geometry.stereo import PlanarPoint, great_circle_distance, lift_array
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.utils.models import ArrayModel

logger = get_logger(__name__)

SERIES_START = 1e-6
RTOL = 1e-11
ATOL = 1e-13
GRID_POINTS = 2001
EIGEN_WINDOW = 1e-6
SCAN = np.logspace(-2.0, 6.0, 321)   # multiples of 1/R^2


class RadialSolution(ArrayModel):
    R: float
    p: float
    r_grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    lambda_: Optional[float] = Field(default=None, alias="lambda")
    mu: Optional[float] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, populate_by_name=True)

    @cached_property
    def spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.r_grid, self.values, self.derivative)

    def evaluate(self, r: np.ndarray) -> np.ndarray:
        return self.spline(np.clip(r, 0.0, self.R))

    def evaluate_derivative(self, r: np.ndarray) -> np.ndarray:
        return self.spline(np.clip(r, 0.0, self.R), 1)

    def second_derivative(self, r: np.ndarray) -> np.ndarray:
        """u'' from the equation itself, for r in (0, R]."""
        r = np.asarray(r, dtype=float)
        u = self.evaluate(r)
        du = self.evaluate_derivative(r)
        if self.lambda_ is not None:
            source = self.lambda_ * u
        else:
            source = np.maximum(u, 0.0) ** self.p
        return -du / np.tan(r) - source


def torsion_closed_form(R: float, n: int = GRID_POINTS) -> RadialSolution:
    """u(r) = 2 ln(cos(r/2) / cos(R/2)), the radial solution of -Lap u = 1."""
    if not 0 < R < math.pi:
        raise ValueError(f"radius must lie in (0, pi), got {R}")
    r = np.linspace(0.0, R, n)
    values = 2.0 * np.log(np.cos(0.5 * r) / math.cos(0.5 * R))
    values[-1] = 0.0
    return RadialSolution(R=R, p=0.0, r_grid=r, values=values, derivative=-np.tan(0.5 * r))


def _rhs(mu: float, p: float):
    def f(r, y):
        w, dw = y
        return [dw, -dw / math.tan(r) - mu * max(w, 0.0) ** p]
    return f


def _integrate(R: float, p: float, mu: float, dense: bool = False):
    eps = SERIES_START
    y0 = [1.0 - mu * eps * eps / 4.0, -mu * eps / 2.0]
    sol = solve_ivp(_rhs(mu, p), (eps, R), y0, method="DOP853", rtol=RTOL, atol=ATOL, dense_output=dense)
    if not sol.success:
        raise ShootingFailed(f"integration failed at mu={mu:g}: {sol.message}")
    return sol


def radial_shoot(R: float, p: float, n: int = GRID_POINTS) -> RadialSolution:
    """Positive radial solution (p != 1) or first eigenpair (p = 1) on the ball of radius R."""
    if not 0 < R < math.pi:
        raise ValueError(f"radius must lie in (0, pi), got {R}")
    if p < 0:
        raise ValueError(f"exponent must be non-negative, got {p}")
    eigen = abs(p - 1.0) <= EIGEN_WINDOW
    q = 1.0 if eigen else p

    def end_value(mu: float) -> float:
        return float(_integrate(R, q, mu).y[0, -1])

    scan = SCAN / R ** 2
    previous = scan[0]
    if end_value(previous) <= 0:
        raise ShootingFailed(f"profile already vanishes before R at mu={previous:g}")
    for mu in scan[1:]:
        if end_value(mu) <= 0:
            break
        previous = mu
    else:
        raise ShootingFailed(f"no sign change of w(R) for mu up to {scan[-1]:g}")
    mu = brentq(end_value, previous, mu, xtol=1e-15 * mu, rtol=4 * np.finfo(float).eps, maxiter=200)

    sol = _integrate(R, q, mu, dense=True)
    r = np.linspace(0.0, R, n)
    w = np.empty(n)
    dw = np.empty(n)
    w[0], dw[0] = 1.0, 0.0
    w[1:], dw[1:] = sol.sol(np.maximum(r[1:], SERIES_START))

    if eigen:
        amplitude, lam = 1.0, mu
    else:
        log_m = math.log(mu) / (p - 1.0)
        if abs(log_m) > 700:
            raise ShootingFailed(f"amplitude exp({log_m:.4g}) leaves double precision at p={p}")
        amplitude, lam = math.exp(log_m), None
    if abs(w[-1]) > 1e-10:
        raise ShootingFailed(f"|w(R)| = {abs(w[-1]):.3e} after root finding")

    result = RadialSolution(
        R=R, p=p, r_grid=r, values=amplitude * w, derivative=amplitude * dw, lambda_=lam, mu=mu
    )
    logger.message("Finished").subject("oracle").details(R=R, p=p, mu=mu, center=amplitude).log("debug")
    return result


def geodesic_radii(field: ScalarField, center: PlanarPoint) -> np.ndarray:
    pts = field.mesh.chart_sphere_points
    return great_circle_distance(pts, lift_array(center.as_array())[None, :])


def compare(field: ScalarField, radial: RadialSolution, center: PlanarPoint = PlanarPoint(X=0.0, Y=0.0)) -> dict:
    """Discrepancy between a mesh solution and the radial profile at each vertex's geodesic radius."""
    mesh = field.mesh
    r = geodesic_radii(field, center)
    off = float(np.max(np.abs(r[mesh.boundary_vertices] - radial.R)))
    if off > 2 * mesh.h:
        raise DomainMismatch(f"boundary radii deviate from R={radial.R:g} by {off:.3e} > 2h")
    diff = field.values - radial.evaluate(r)
    sup = float(np.max(np.abs(diff)))
    top = float(np.max(np.abs(radial.values)))
    return {
        "sup_err": sup,
        "l2_err": float(np.sqrt(np.mean(diff ** 2))),
        "rel_sup_err": sup / top if top > 0 else sup,
    }


def radial_hessian_eigs(radial: RadialSolution, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Radial and tangential eigenvalues v''(r), v'(r) cot r of the transformed profile
    v = u^((1-p)/2) (log u at p = 1), for r in (0, R)."""
    r = np.asarray(r, dtype=float)
    u = radial.evaluate(r)
    du = radial.evaluate_derivative(r)
    ddu = radial.second_derivative(r)
    if abs(radial.p - 1.0) <= EIGEN_WINDOW:
        dv = du / u
        ddv = ddu / u - (du / u) ** 2
    else:
        a = 0.5 * (1.0 - radial.p)
        dv = a * u ** (a - 1.0) * du
        ddv = a * u ** (a - 1.0) * ddu + a * (a - 1.0) * u ** (a - 2.0) * du ** 2
    return ddv, dv / np.tan(r)
