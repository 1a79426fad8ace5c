# core/geometry/stereo.py
"""Stereographic chart of the unit sphere from the north pole.

The round metric pulls back to rho^2 (dX^2 + dY^2) with rho^2 = 4 / (1 + X^2 + Y^2)^2.
Scalar operations take SpherePoint / PlanarPoint models; the *_array helpers are the
vectorized versions used by the mesh, solver and verification code.
"""
from typing import Literal, TYPE_CHECKING
import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from core.config import CONFIG
from core.errors import PoleProjection, NonUnitNormal, DegenerateBoundary

if TYPE_CHECKING:
    from core.mesh.domain import DomainSpec

POLE_TOLERANCE = 1e-9
UNIT_TOLERANCE = 1e-12
NORMAL_TOLERANCE = 1e-10

ConvexityVerdict = Literal["uniformly_convex", "convex_marginal", "not_convex"]


class SpherePoint(BaseModel):
    """Unit vector of R^3."""
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @model_validator(mode="after")
    def _unit(self) -> "SpherePoint":
        if abs(self.x ** 2 + self.y ** 2 + self.z ** 2 - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"not a unit vector: ({self.x}, {self.y}, {self.z})")
        return self

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(x=float(v[0]), y=float(v[1]), z=float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class PlanarPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    X: float
    Y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.X, self.Y])


SOUTH_POLE = SpherePoint(x=0.0, y=0.0, z=-1.0)


class ConvexityReport(BaseModel):
    kappa_min: float
    verdict: ConvexityVerdict


# -- vectorized chart maps -------------------------------------------------------------

def project_array(xyz: np.ndarray) -> np.ndarray:
    xyz = np.asarray(xyz, dtype=float)
    denom = 1.0 - xyz[..., 2]
    return np.stack([xyz[..., 0] / denom, xyz[..., 1] / denom], axis=-1)


def lift_array(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    s = 1.0 + q[..., 0] ** 2 + q[..., 1] ** 2
    return np.stack([2 * q[..., 0] / s, 2 * q[..., 1] / s, (s - 2.0) / s], axis=-1)


def rho_squared(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return 4.0 / (1.0 + q[..., 0] ** 2 + q[..., 1] ** 2) ** 2


def log_factor_gradient(q: np.ndarray) -> np.ndarray:
    """Gradient of f = log(rho), the conformal exponent of g = e^{2f}(dX^2 + dY^2)."""
    q = np.asarray(q, dtype=float)
    s = 1.0 + q[..., 0] ** 2 + q[..., 1] ** 2
    return -2.0 * q / s[..., None]


def lift_jacobian(q: np.ndarray) -> np.ndarray:
    """Jacobian of the inverse chart, shape (..., 3, 2); its columns have length rho."""
    q = np.asarray(q, dtype=float)
    X, Y = q[..., 0], q[..., 1]
    s = 1.0 + X ** 2 + Y ** 2
    s2 = s ** 2
    J = np.empty(q.shape[:-1] + (3, 2))
    J[..., 0, 0] = 2.0 * (s - 2.0 * X ** 2) / s2
    J[..., 1, 0] = -4.0 * X * Y / s2
    J[..., 2, 0] = 4.0 * X / s2
    J[..., 0, 1] = -4.0 * X * Y / s2
    J[..., 1, 1] = 2.0 * (s - 2.0 * Y ** 2) / s2
    J[..., 2, 1] = 4.0 * Y / s2
    return J


def pushforward(q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Image in R^3 of the chart vector w attached at q."""
    return np.einsum("...ij,...j->...i", lift_jacobian(q), np.asarray(w, dtype=float))


def metric_inner(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inner product of chart vectors a, b at q in the conformal metric."""
    return rho_squared(q) * np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def great_circle_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dots = np.clip(np.sum(np.asarray(a) * np.asarray(b), axis=-1), -1.0, 1.0)
    return np.arccos(dots)


def boundary_curvature_array(q: np.ndarray, kappa_E: np.ndarray, nu_E: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return 0.5 * (1.0 + np.sum(q * q, axis=-1)) * np.asarray(kappa_E) - np.sum(q * np.asarray(nu_E), axis=-1)


def rotation_to_south(center: np.ndarray) -> np.ndarray:
    """Rotation matrix R with R @ center = south pole (Rodrigues formula)."""
    a = np.asarray(center, dtype=float)
    a = a / np.linalg.norm(a)
    b = SOUTH_POLE.as_array()
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if np.linalg.norm(v) < 1e-15:
        # already at the south pole, or at the north pole: flip around the x axis
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


# -- scalar operations -----------------------------------------------------------------

def stereo_project(p: SpherePoint) -> PlanarPoint:
    if p.z >= 1.0 - POLE_TOLERANCE:
        raise PoleProjection(f"cannot project the north pole neighbourhood, z={p.z}")
    X, Y = project_array(p.as_array())
    return PlanarPoint(X=float(X), Y=float(Y))


def stereo_lift(q: PlanarPoint) -> SpherePoint:
    x, y, z = lift_array(q.as_array())
    # the formula is exact up to rounding; renormalize for the unit-vector validator
    return SpherePoint.from_vector([x, y, z])


def conformal_factor(q: PlanarPoint) -> float:
    return float(rho_squared(q.as_array()))


def spherical_boundary_curvature(q: PlanarPoint, kappa_E: float, nu_E) -> float:
    """Geodesic curvature on S^2 of a boundary whose planar image has curvature kappa_E
    and outward unit normal nu_E at q."""
    nu = np.asarray(nu_E, dtype=float)
    if abs(np.linalg.norm(nu) - 1.0) > NORMAL_TOLERANCE:
        raise NonUnitNormal(f"|nu_E| = {np.linalg.norm(nu)!r}")
    return float(boundary_curvature_array(q.as_array(), kappa_E, nu))


def geodesic_distance(p: SpherePoint, q: SpherePoint) -> float:
    return float(great_circle_distance(p.as_array(), q.as_array()))


def check_uniform_convexity(
    domain: "DomainSpec",
    n_samples: int,
    tolerance: float = CONFIG.curvature_tolerance,
) -> ConvexityReport:
    from core.mesh.domain import planarize

    curve = planarize(domain, n_samples, enforce_disk=False)
    kappa = boundary_curvature_array(curve.samples, curve.kappa_E, curve.nu_E)
    if not np.all(np.isfinite(kappa)):
        raise DegenerateBoundary("non-finite boundary curvature samples")
    kappa_min = float(kappa.min())
    if kappa_min > tolerance:
        verdict = "uniformly_convex"
    elif kappa_min >= -tolerance:
        verdict = "convex_marginal"
    else:
        verdict = "not_convex"
    return ConvexityReport(kappa_min=kappa_min, verdict=verdict)
