# core/verify/hessian.py
"""Covariant Hessians on S^2 recovered from nodal fields in the stereographic chart.

Euclidean chart derivatives come from a weighted least-squares Taylor fit over the 2-ring
patch of each vertex, weights 1/d^2. Two fits are available:

    fit_degree=3   9-coefficient cubic with the value at the vertex held fixed (default);
                   patches smaller than CUBIC_PATCH fall back to the anchored quadratic
    fit_degree=2   plain 6-coefficient quadratic, constant term fitted with the rest

Second derivatives from the cubic are O(h^2) on smooth fields, from the quadratic O(h).

With f = log rho the metric is e^{2f}(dX^2 + dY^2), and the covariant Hessian in chart
coordinates is

    (Hess v)_ij = v_ij - f_i v_j - f_j v_i + delta_ij (f . grad v)

Dividing by rho^2 gives the components A, B, C in the orthonormal frame (d/dX, d/dY) / rho.
"""
from typing import Callable, Literal, Optional
import numpy as np
from pydantic import BaseModel, Field
from scipy.sparse import identity

from core.errors import NonPositive, PatchDeficient
from core.geometry.stereo import lift_array, log_factor_gradient, project_array, pushforward, rho_squared
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.utils.models import ArrayModel

logger = get_logger(__name__)

EIGEN_WINDOW = 1e-6
MIN_PATCH = 6
CUBIC_PATCH = 12

HessianMode = Literal["chain", "direct"]


class HessianSample(BaseModel):
    A: float
    B: float
    C: float
    phi: float
    trace: float
    eig_min: float
    eig_max: float

    @classmethod
    def from_components(cls, A: float, B: float, C: float) -> "HessianSample":
        lo, hi = _eigenvalues(np.array(A), np.array(B), np.array(C))
        return cls(A=A, B=B, C=C, phi=A * C - B * B, trace=A + C, eig_min=float(lo), eig_max=float(hi))


def _eigenvalues(A: np.ndarray, B: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = 0.5 * (A + C)
    radius = np.hypot(0.5 * (A - C), B)
    return mean - radius, mean + radius


class HessianField(ArrayModel):
    """Per-vertex gradient and covariant Hessian in the orthonormal frame."""
    mesh: TriangleMesh = Field(exclude=True, repr=False)
    grad: np.ndarray                 # (V, 2) orthonormal components of grad v
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    valid: np.ndarray                # vertices where a fit exists
    chart_gradient: Optional[np.ndarray] = None   # (V, 2) v_X, v_Y
    chart_hessian: Optional[np.ndarray] = None    # (V, 3) v_XX, v_XY, v_YY

    @property
    def phi(self) -> np.ndarray:
        return self.A * self.C - self.B ** 2

    @property
    def trace(self) -> np.ndarray:
        return self.A + self.C

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        return _eigenvalues(self.A, self.B, self.C)

    @property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.grad, axis=1)

    def sample(self, i: int) -> HessianSample:
        return HessianSample.from_components(float(self.A[i]), float(self.B[i]), float(self.C[i]))

    def matrices(self) -> np.ndarray:
        return np.stack([np.stack([self.A, self.B], -1), np.stack([self.B, self.C], -1)], -2)

    def quadratic_form(self, w: np.ndarray, index: Optional[np.ndarray] = None) -> np.ndarray:
        """Hess(w, w) for orthonormal-frame directions w (one per selected vertex)."""
        sel = slice(None) if index is None else index
        w = np.asarray(w, dtype=float)
        return self.A[sel] * w[..., 0] ** 2 + 2 * self.B[sel] * w[..., 0] * w[..., 1] + self.C[sel] * w[..., 1] ** 2


def two_ring_patches(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    """CSR (indptr, indices) of the 2-ring of every vertex, the vertex itself excluded."""
    step = (mesh.adjacency + identity(mesh.n_vertices, format="csr")).astype(bool).astype(float)
    ring = (step @ step).tocsr()
    ring.setdiag(0)
    ring.eliminate_zeros()
    ring.sort_indices()
    return ring.indptr, ring.indices


def _taylor_rows(d: np.ndarray, degree: int) -> np.ndarray:
    x, y = d[:, 0], d[:, 1]
    cols = [x, y, 0.5 * x * x, x * y, 0.5 * y * y]
    if degree >= 3:
        cols += [x ** 3, x * x * y, x * y * y, y ** 3]
    return np.stack(cols, axis=1)


def recover_derivatives(
    mesh: TriangleMesh,
    values: np.ndarray,
    valid: Optional[np.ndarray] = None,
    fit_degree: int = 3,
    anchored: Optional[bool] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chart gradient (V, 2), chart Hessian (V, 3) and the mask of fitted vertices.

    `anchored` holds the vertex value fixed; by default only the cubic fit is anchored.
    """
    anchored = fit_degree != 2 if anchored is None else anchored
    values = np.asarray(values, dtype=float)
    valid = np.ones(mesh.n_vertices, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    indptr, indices = two_ring_patches(mesh)
    grad = np.full((mesh.n_vertices, 2), np.nan)
    hess = np.full((mesh.n_vertices, 3), np.nan)
    scale = mesh.h
    for i in np.flatnonzero(valid):
        patch = indices[indptr[i]:indptr[i + 1]]
        patch = patch[valid[patch]]
        if len(patch) < MIN_PATCH:
            raise PatchDeficient(f"vertex {i}: {len(patch)} usable neighbours, need {MIN_PATCH}")
        degree = fit_degree if len(patch) >= CUBIC_PATCH else 2
        d = (mesh.vertices[patch] - mesh.vertices[i]) / scale
        w = 1.0 / np.linalg.norm(d, axis=1)
        rows = _taylor_rows(d, degree)
        if not anchored:
            rows = np.column_stack([np.ones(len(d)), rows])
        rhs = (values[patch] - values[i]) * w
        coef, *_ = np.linalg.lstsq(rows * w[:, None], rhs, rcond=None)
        coef = coef if anchored else coef[1:]
        grad[i] = coef[:2] / scale
        hess[i] = coef[2:5] / scale ** 2
    return grad, hess, valid.copy()


def _covariant_components(q: np.ndarray, grad: np.ndarray, hess: np.ndarray):
    f = log_factor_gradient(q)
    fg = np.sum(f * grad, axis=1)
    hxx = hess[:, 0] - 2 * f[:, 0] * grad[:, 0] + fg
    hxy = hess[:, 1] - f[:, 0] * grad[:, 1] - f[:, 1] * grad[:, 0]
    hyy = hess[:, 2] - 2 * f[:, 1] * grad[:, 1] + fg
    r2 = rho_squared(q)
    return hxx / r2, hxy / r2, hyy / r2, grad / np.sqrt(r2)[:, None]


def covariant_hessian(mesh: TriangleMesh, v: ScalarField, fit_degree: int = 3) -> HessianField:
    grad, hess, valid = recover_derivatives(mesh, v.values, v.valid_mask, fit_degree)
    A, B, C, grad_on = _covariant_components(mesh.vertices, grad, hess)
    logger.message("Finished").subject("verify").details(
        hessian=v.quantity, fitted=int(valid.sum()), degree=fit_degree
    ).log("debug")
    return HessianField(mesh=mesh, grad=grad_on, A=A, B=B, C=C, valid=valid, chart_gradient=grad, chart_hessian=hess)


def conformal_laplacian(mesh: TriangleMesh, v: ScalarField) -> np.ndarray:
    """Lap_g v = rho^-2 (v_XX + v_YY) from an independent quadratic fit."""
    _, hess, valid = recover_derivatives(mesh, v.values, v.valid_mask, fit_degree=2, anchored=True)
    lap = (hess[:, 0] + hess[:, 2]) / rho_squared(mesh.vertices)
    lap[~valid] = np.nan
    return lap


def transform_exponent(p: float) -> Optional[float]:
    """(1 - p) / 2, or None for the logarithmic transform at p = 1."""
    return None if abs(p - 1.0) <= EIGEN_WINDOW else 0.5 * (1.0 - p)


def power_transform(u: ScalarField, p: float) -> ScalarField:
    """v = u^((1-p)/2), or log u at p = 1."""
    mesh = u.mesh
    interior = ~mesh.boundary_mask
    if np.any(u.values[interior] <= 0):
        bad = int(np.sum(u.values[interior] <= 0))
        raise NonPositive(f"{bad} interior values of u are not positive")
    alpha = transform_exponent(p)
    values = np.zeros(mesh.n_vertices)
    if alpha is None:
        values[interior] = np.log(u.values[interior])
        return u.with_values(values, quantity="log_u", p=p, valid=interior.copy(), normalization="log")
    values[interior] = u.values[interior] ** alpha
    if p < 1:
        return u.with_values(values, quantity="v", p=p, valid=None, normalization=f"power {alpha:g}")
    # v -> infinity at the boundary
    return u.with_values(values, quantity="v", p=p, valid=interior.copy(), normalization=f"power {alpha:g}")


def chain_rule_hessian(u: ScalarField, hess_u: HessianField, alpha: Optional[float]) -> HessianField:
    """Hessian of u^alpha (alpha None: of log u) from the derivatives of u.

    Hess v = a u^(a-1) Hess u + a (a-1) u^(a-2) grad u (x) grad u
    Hess log u = Hess u / u - grad u (x) grad u / u^2
    """
    mesh = u.mesh
    ok = hess_u.valid & ~mesh.boundary_mask
    uu = np.where(ok, u.values, 1.0)
    g = hess_u.grad
    if alpha is None:
        first, second = 1.0 / uu, -1.0 / uu ** 2
    else:
        first = alpha * uu ** (alpha - 1.0)
        second = alpha * (alpha - 1.0) * uu ** (alpha - 2.0)
    A = first * hess_u.A + second * g[:, 0] ** 2
    B = first * hess_u.B + second * g[:, 0] * g[:, 1]
    C = first * hess_u.C + second * g[:, 1] ** 2
    grad = first[:, None] * g
    for arr in (A, B, C, grad):
        arr[~ok] = np.nan
    return HessianField(mesh=mesh, grad=grad, A=A, B=B, C=C, valid=ok)


def transform_hessian(u: ScalarField, hess_u: HessianField, p: float) -> HessianField:
    return chain_rule_hessian(u, hess_u, transform_exponent(p))


def hessian_of_transform(
    u: ScalarField,
    p: float,
    mode: HessianMode = "chain",
    fit_degree: int = 3,
    hess_u: Optional[HessianField] = None,
) -> tuple[ScalarField, HessianField]:
    """Transformed field v and its covariant Hessian, by the chain rule or by fitting v."""
    v = power_transform(u, p)
    if mode == "direct":
        return v, covariant_hessian(u.mesh, v, fit_degree)
    hess_u = hess_u or covariant_hessian(u.mesh, u, fit_degree)
    return v, transform_hessian(u, hess_u, p)


def geodesic_points(q: np.ndarray, w: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Chart points at arclength +s and -s along the great circle through q with
    orthonormal-frame unit direction w."""
    q = np.atleast_2d(q)
    w = np.atleast_2d(w)
    x = lift_array(q)
    t = pushforward(q, w / np.sqrt(rho_squared(q))[:, None])
    t = t / np.linalg.norm(t, axis=1)[:, None]
    forward = np.cos(s) * x + np.sin(s) * t
    backward = np.cos(s) * x - np.sin(s) * t
    return project_array(forward), project_array(backward)


def geodesic_second_difference(
    func: Callable[[np.ndarray], np.ndarray], q: np.ndarray, w: np.ndarray, s: float
) -> np.ndarray:
    """(v(gamma(s)) - 2 v(gamma(0)) + v(gamma(-s))) / s^2 along unit-speed geodesics gamma."""
    q = np.atleast_2d(q)
    forward, backward = geodesic_points(q, w, s)
    return (func(forward) - 2.0 * func(q) + func(backward)) / s ** 2
