# core/verify/levels.py
"""Level curves {u = c} by marching triangles, and their geodesic curvature on S^2.

With tau a unit tangent of the level curve, the curvature with respect to the outward
normal of the superlevel set {u >= c} is  kappa_g = -Hess u(tau, tau) / |grad u|.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Optional
import numpy as np

from core.config import CONFIG
from core.errors import EmptyLevel, NotRegularValue
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.logging import get_logger
from core.utils.models import ArrayModel
from core.verify.hessian import HessianField, covariant_hessian, transform_exponent
from core.verify.report import DualityResult, LevelSetResult

logger = get_logger(__name__)

REGULAR_VALUE_SCALE = 1e-8


class LevelCurve(ArrayModel):
    c: float
    points: np.ndarray       # (N, 2) chart points, loops concatenated, each counterclockwise
    kappa_g: np.ndarray      # (N,)
    grad_norm: np.ndarray    # (N,)
    loops: list[np.ndarray]  # index arrays into points, one per closed loop

    def samples(self) -> list[dict]:
        return [
            {"point": (float(x), float(y)), "kappa_g": float(k)}
            for (x, y), k in zip(self.points, self.kappa_g)
        ]

    def result(self, fraction: Optional[float] = None) -> LevelSetResult:
        k = float(self.kappa_g.min())
        return LevelSetResult(
            c=self.c, fraction=fraction, min_kappa_g=k, convex=k > 0, samples=len(self.points), loops=len(self.loops)
        )


def _crossings(mesh: TriangleMesh, values: np.ndarray, c: float):
    """Edge crossings of the level c and the segment each triangle contributes."""
    above = values >= c
    tri = mesh.triangles
    segments = []
    for t in np.flatnonzero(above[tri].sum(axis=1) % 3 != 0):
        corners = tri[t]
        keys = []
        for k in range(3):
            a, b = int(corners[k]), int(corners[(k + 1) % 3])
            if above[a] != above[b]:
                keys.append((min(a, b), max(a, b)))
        segments.append(tuple(keys))
    return segments


def _chain(segments: list[tuple]) -> list[list[tuple]]:
    """Join segments sharing edge keys into closed loops."""
    links: dict[tuple, list[tuple]] = {}
    for a, b in segments:
        links.setdefault(a, []).append(b)
        links.setdefault(b, []).append(a)
    loops, seen = [], set()
    for start in links:
        if start in seen:
            continue
        loop, prev, cur = [start], None, start
        seen.add(start)
        while True:
            nxt = [k for k in links[cur] if k != prev]
            if not nxt or nxt[0] == start:
                break
            prev, cur = cur, nxt[0]
            if cur in seen:
                break
            seen.add(cur)
            loop.append(cur)
        loops.append(loop)
    return loops


def level_curvature(
    mesh: TriangleMesh,
    u: ScalarField,
    c: float,
    hessian: Optional[HessianField] = None,
    fit_degree: int = 3,
) -> LevelCurve:
    values = u.values
    if not c < values.max():
        raise EmptyLevel(f"level c={c:g} is not below max u={values.max():g}")
    if not c > 0:
        raise EmptyLevel(f"level c={c:g} must be positive")
    hessian = hessian or covariant_hessian(mesh, u, fit_degree)

    loops_keys = _chain(_crossings(mesh, values, c))
    pts, grads, mats, loops = [], [], [], []
    H = hessian.matrices()
    start = 0
    for keys in loops_keys:
        e = np.array(keys)
        ua, ub = values[e[:, 0]], values[e[:, 1]]
        t = ((c - ua) / (ub - ua))[:, None]
        loop_pts = (1 - t) * mesh.vertices[e[:, 0]] + t * mesh.vertices[e[:, 1]]
        loop_grad = (1 - t) * hessian.grad[e[:, 0]] + t * hessian.grad[e[:, 1]]
        loop_H = (1 - t)[:, :, None] * H[e[:, 0]] + t[:, :, None] * H[e[:, 1]]
        x, y = loop_pts[:, 0], loop_pts[:, 1]
        if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            loop_pts, loop_grad, loop_H = loop_pts[::-1], loop_grad[::-1], loop_H[::-1]
        pts.append(loop_pts)
        grads.append(loop_grad)
        mats.append(loop_H)
        loops.append(np.arange(start, start + len(loop_pts)))
        start += len(loop_pts)
    if not pts:
        raise EmptyLevel(f"no crossing of level c={c:g}")

    points, grad, Hs = np.vstack(pts), np.vstack(grads), np.concatenate(mats)
    norm = np.linalg.norm(grad, axis=1)
    tolerance = REGULAR_VALUE_SCALE * float(np.nanmax(hessian.grad_norm))
    if not np.all(np.isfinite(norm)) or norm.min() <= tolerance:
        raise NotRegularValue(f"|grad u| = {np.nanmin(norm):.3e} on the level c={c:g}")
    tau = np.stack([-grad[:, 1], grad[:, 0]], axis=1) / norm[:, None]
    kappa = -np.einsum("ni,nij,nj->n", tau, Hs, tau) / norm
    logger.message("Finished").subject("verify").details(level=c, samples=len(points), min_kappa=kappa.min()).log("debug")
    return LevelCurve(c=float(c), points=points, kappa_g=kappa, grad_norm=norm, loops=loops)


def level_set_duality(u: ScalarField, v: ScalarField, p: float, c: float) -> DualityResult:
    """{u >= c} equals {v >= c^a} for p < 1, {v <= c^a} for p > 1 and {log u >= log c} at p = 1."""
    interior = ~u.mesh.boundary_mask
    mask_u = u.values[interior] >= c
    alpha = transform_exponent(p)
    vv = v.values[interior]
    if alpha is None:
        mask_v = vv >= np.log(c)
    elif p < 1:
        mask_v = vv >= c ** alpha
    else:
        mask_v = vv <= c ** alpha
    # vertices on the level itself
    on_level = np.isclose(u.values[interior], c, rtol=1e-12, atol=0.0)
    mismatches = int(np.sum((mask_u != mask_v) & ~on_level))
    return DualityResult(c=float(c), agree=mismatches == 0, mismatches=mismatches)


def level_results(
    mesh: TriangleMesh, u: ScalarField, fractions: list[float], hessian: HessianField, threads: Optional[int] = None
) -> list[LevelSetResult]:
    """Level curvature at c = fraction * max u for every fraction, in parallel across levels."""
    threads = CONFIG.threads if threads is None else threads
    top = float(u.values.max())

    def one(fraction: float) -> LevelSetResult:
        return level_curvature(mesh, u, fraction * top, hessian).result(fraction)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(one, fractions))
