# core/mesh/domain.py
"""Domain descriptions and their planar (stereographic) boundary curves.

Every domain is normalized so that a designated interior point sits at the south pole,
whose image is the origin of the chart. Boundary curves are closed, counterclockwise,
and carry Euclidean curvature and outward normal per sample.
"""
from typing import Annotated, Callable, Literal, Union
import numpy as np
from pydantic import BaseModel, Field, TypeAdapter, field_validator
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from core.config import CONFIG
from core.errors import NotInDisk, SelfIntersection, DegenerateBoundary
from core.geometry.stereo import PlanarPoint, SpherePoint, SOUTH_POLE, rotation_to_south
from core.utils.logging import get_logger

logger = get_logger(__name__)

DISK_TOLERANCE = 1e-9
ARCLENGTH_TABLE_SIZE = 4096

# r(t), r'(t), r''(t) for t in [0, 1), each of shape (n, 2)
Parametrization = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


class GeodesicBall(BaseModel):
    kind: Literal["ball"] = "ball"
    center: SpherePoint = SOUTH_POLE
    radius: float = Field(..., gt=0.0, lt=np.pi)


class PlanarConvexCurve(BaseModel):
    """Closed planar curve given by ordered samples (counterclockwise)."""
    kind: Literal["curve"] = "curve"
    samples: list[PlanarPoint] = Field(..., min_length=8)


class SphericalEllipse(BaseModel):
    """Planar curve (tan(a/2) cos t, tan(b/2) sin t)."""
    kind: Literal["ellipse"] = "ellipse"
    a: float = Field(..., gt=0.0, le=np.pi / 2)
    b: float = Field(..., gt=0.0, le=np.pi / 2)


DomainSpec = Annotated[Union[GeodesicBall, PlanarConvexCurve, SphericalEllipse], Field(discriminator="kind")]
DOMAIN_ADAPTER = TypeAdapter(DomainSpec)


class BoundaryCurve:
    """Closed counterclockwise planar curve with samples, Euclidean curvature and outward normals."""

    def __init__(self, parametrization: Parametrization, n_samples: int, rotation: np.ndarray, label: str):
        self._param = parametrization
        self.rotation = rotation
        self.label = label
        t = np.linspace(0.0, 1.0, ARCLENGTH_TABLE_SIZE + 1)
        _, d1, _ = self._param(t)
        self._t_table = t
        self._s_table = cumulative_trapezoid(np.linalg.norm(d1, axis=1), t, initial=0.0)
        self.length = float(self._s_table[-1])
        self.samples, self.kappa_E, self.nu_E = self.evaluate(self.arclength_parameters(n_samples))

    def arclength_parameters(self, n: int) -> np.ndarray:
        """Parameters of n points equally spaced in arclength, starting at t = 0."""
        s = np.arange(n) * (self.length / n)
        return np.interp(s, self._s_table, self._t_table)

    def evaluate(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r, d1, d2 = self._param(np.asarray(t, dtype=float))
        speed = np.linalg.norm(d1, axis=1)
        if np.any(speed < 1e-14):
            raise DegenerateBoundary(f"{self.label}: stationary parametrization")
        kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3
        nu = np.stack([d1[:, 1], -d1[:, 0]], axis=1) / speed[:, None]
        return r, kappa, nu

    def signed_area(self) -> float:
        x, y = self.samples[:, 0], self.samples[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def check_simple(self) -> None:
        if polyline_self_intersects(self.samples):
            raise SelfIntersection(f"{self.label}: boundary curve crosses itself")
        if not (np.all(np.isfinite(self.kappa_E)) and np.all(np.isfinite(self.samples))):
            raise DegenerateBoundary(f"{self.label}: non-finite boundary samples")

    def check_disk(self) -> None:
        radius = np.linalg.norm(self.samples, axis=1)
        if radius.max() > 1.0 + DISK_TOLERANCE:
            raise NotInDisk(
                f"{self.label}: boundary reaches |q| = {radius.max():.12g} > 1, "
                "the domain does not fit in an open hemisphere"
            )


def polyline_self_intersects(points: np.ndarray) -> bool:
    """Proper crossing test between all non-adjacent edges of a closed polyline."""
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0)
    n = len(p)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]

    def orient(a, b, c):
        return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])

    a, b, c, d = p[i], q[i], p[j], q[j]
    d1, d2 = orient(a, b, c), orient(a, b, d)
    d3, d4 = orient(c, d, a), orient(c, d, b)
    return bool(np.any((d1 * d2 < 0) & (d3 * d4 < 0)))


def _circle(radius: float) -> Parametrization:
    def param(t: np.ndarray):
        theta = 2 * np.pi * t
        c, s = np.cos(theta), np.sin(theta)
        w = 2 * np.pi
        r = radius * np.stack([c, s], axis=1)
        return r, w * radius * np.stack([-s, c], axis=1), -(w ** 2) * r
    return param


def _ellipse(A: float, B: float) -> Parametrization:
    def param(t: np.ndarray):
        theta = 2 * np.pi * t
        c, s = np.cos(theta), np.sin(theta)
        w = 2 * np.pi
        r = np.stack([A * c, B * s], axis=1)
        return r, w * np.stack([-A * s, B * c], axis=1), -(w ** 2) * r
    return param


def _spline(samples: np.ndarray) -> Parametrization:
    closed = np.vstack([samples, samples[:1]])
    chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
    if chord[-1] <= 0 or np.any(np.diff(chord) <= 0):
        raise DegenerateBoundary("repeated or collapsed curve samples")
    spline = CubicSpline(chord / chord[-1], closed, bc_type="periodic")

    def param(t: np.ndarray):
        t = np.mod(t, 1.0)
        return spline(t), spline(t, 1), spline(t, 2)
    return param


def planarize(domain: DomainSpec, n_boundary: int = CONFIG.n_boundary, enforce_disk: bool = True) -> BoundaryCurve:
    """Planar boundary curve of the domain in the stereographic chart."""
    rotation = np.eye(3)
    if isinstance(domain, GeodesicBall):
        rotation = rotation_to_south(domain.center.as_array())
        curve = BoundaryCurve(_circle(np.tan(domain.radius / 2)), n_boundary, rotation, f"ball(R={domain.radius:.6g})")
    elif isinstance(domain, SphericalEllipse):
        curve = BoundaryCurve(
            _ellipse(np.tan(domain.a / 2), np.tan(domain.b / 2)), n_boundary, rotation,
            f"ellipse(a={domain.a:.6g}, b={domain.b:.6g})",
        )
    else:
        samples = np.array([[q.X, q.Y] for q in domain.samples])
        if np.allclose(samples[0], samples[-1]):
            samples = samples[:-1]
        if polyline_self_intersects(samples):
            raise SelfIntersection("input samples of the planar curve cross each other")
        x, y = samples[:, 0], samples[:, 1]
        if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            logger.message("Processing").subject("mesh").details(reoriented=True).log("warning")
            samples = samples[::-1]
        curve = BoundaryCurve(_spline(samples), n_boundary, rotation, f"curve(n={len(samples)})")

    curve.check_simple()
    if enforce_disk:
        curve.check_disk()
    logger.message("Finished").subject("mesh").details(
        curve=curve.label, n=n_boundary, length=curve.length
    ).log("debug")
    return curve
