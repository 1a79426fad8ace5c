# core/mesh/generator.py
"""Quasi-uniform triangulation of a planar convex region.

Boundary nodes subdivide the curve evenly by arclength and always occupy indices 0..B-1 in
counterclockwise order; interior nodes come from a hexagonal lattice, relaxed by Laplacian
smoothing, and the triangulation is the Delaunay triangulation of the node set.
"""
from functools import cached_property
import math
import numpy as np
from matplotlib.path import Path as PolygonPath
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, cKDTree

from core.errors import MeshFailure
from core.geometry.stereo import lift_array
from core.mesh.domain import BoundaryCurve
from core.utils.logging import get_logger
from core.utils.models import ArrayModel

logger = get_logger(__name__)

MIN_ANGLE_DEG = 20.0
MAX_EDGE_FACTOR = 1.5
MIN_BOUNDARY_NODES = 16


class TriangleMesh(ArrayModel):
    vertices: np.ndarray            # (V, 2) planar coordinates
    triangles: np.ndarray           # (T, 3) counterclockwise vertex indices
    boundary_vertices: np.ndarray   # (B,) ordered counterclockwise along the boundary
    boundary_kappa_E: np.ndarray    # (B,)
    boundary_nu_E: np.ndarray       # (B, 2) outward unit normals
    h: float
    rotation: np.ndarray = np.eye(3)
    label: str = ""

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices] = True
        return mask

    @cached_property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def edges(self) -> np.ndarray:
        e = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def adjacency(self) -> csr_matrix:
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        return coo_matrix(
            (data, (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n)
        ).tocsr()

    def neighbors(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.indices[a.indptr[i]:a.indptr[i + 1]]

    def ring(self, i: int, depth: int = 2) -> np.ndarray:
        """Vertices within `depth` edges of i, excluding i."""
        seen = {int(i)}
        front = [int(i)]
        for _ in range(depth):
            nxt = []
            for j in front:
                for k in self.neighbors(j):
                    if int(k) not in seen:
                        seen.add(int(k))
                        nxt.append(int(k))
            front = nxt
        seen.discard(int(i))
        return np.array(sorted(seen), dtype=int)

    @cached_property
    def chart_sphere_points(self) -> np.ndarray:
        """Lift of every vertex, in the rotated frame where the chart center is the south pole."""
        return lift_array(self.vertices)

    @cached_property
    def sphere_points(self) -> np.ndarray:
        """Lift of every vertex in the frame of the original domain description."""
        return self.chart_sphere_points @ self.rotation

    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.triangles)

    def min_angle_degrees(self) -> float:
        return float(_angles(self.vertices, self.triangles).min())

    def max_edge_length(self) -> float:
        e = self.edges
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).max())

    def euler_characteristic(self) -> int:
        return int(self.n_vertices - len(self.edges) + len(self.triangles))


def _signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a, b, c = points[triangles[:, 0]], points[triangles[:, 1]], points[triangles[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1]))


def _angles(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Interior angles in degrees, shape (T, 3)."""
    p = points[triangles]
    out = np.empty(triangles.shape)
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        cos = np.sum(u * w, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        out[:, k] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return out


def _max_edges(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = points[triangles]
    return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2).max(axis=1)


def _hex_lattice(lower: np.ndarray, upper: np.ndarray, h: float) -> np.ndarray:
    """Equilateral lattice with spacing h anchored at the origin, covering the box."""
    dy = h * math.sqrt(3.0) / 2.0
    rows = np.arange(math.floor(lower[1] / dy) - 1, math.ceil(upper[1] / dy) + 2)
    cols = np.arange(math.floor(lower[0] / h) - 1, math.ceil(upper[0] / h) + 2)
    J, I = np.meshgrid(rows, cols, indexing="ij")
    X = h * (I + 0.5 * (J % 2))
    Y = dy * J
    return np.stack([X.ravel(), Y.ravel()], axis=1)


class _Builder:
    """Mutable node set used while the mesh is being constructed."""

    def __init__(self, boundary: np.ndarray, curve: BoundaryCurve, h: float):
        self.boundary = boundary
        self.n_b = len(boundary)
        self.h = h
        self.polygon = PolygonPath(np.vstack([boundary, boundary[:1]]), closed=True)
        dense_t = curve.arclength_parameters(8 * self.n_b)
        self.wall = cKDTree(curve.evaluate(dense_t)[0])
        self.interior = np.empty((0, 2))

    def inside(self, pts: np.ndarray, clearance: float) -> np.ndarray:
        if len(pts) == 0:
            return np.zeros(0, dtype=bool)
        ok = self.polygon.contains_points(pts)
        dist, _ = self.wall.query(pts)
        return ok & (dist > clearance)

    @property
    def points(self) -> np.ndarray:
        return np.vstack([self.boundary, self.interior])

    def triangulate(self) -> np.ndarray:
        pts = self.points
        tri = Delaunay(pts).simplices
        area = _signed_areas(pts, tri)
        tri[area < 0] = tri[area < 0][:, [0, 2, 1]]
        centroids = pts[tri].mean(axis=1)
        keep = self.polygon.contains_points(centroids) & (np.abs(area) > 1e-14 * self.h ** 2)
        return tri[keep]

    def smooth(self, triangles: np.ndarray, rounds: int) -> np.ndarray:
        for _ in range(rounds):
            pts = self.points
            n = len(pts)
            e = triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
            adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
            adj = ((adj + adj.T) > 0).astype(float)
            degree = np.asarray(adj.sum(axis=1)).ravel()
            averaged = (adj @ pts)[self.n_b:] / np.maximum(degree[self.n_b:], 1.0)[:, None]
            moved = self.inside(averaged, 0.25 * self.h) & (degree[self.n_b:] > 0)
            self.interior = np.where(moved[:, None], averaged, self.interior)
            triangles = self.triangulate()
        return triangles

    def repair(self, triangles: np.ndarray) -> bool:
        """One repair pass; returns False when the mesh already meets the quality targets."""
        pts = self.points
        bad_angle = _angles(pts, triangles).min(axis=1) < MIN_ANGLE_DEG
        bad_edge = _max_edges(pts, triangles) > MAX_EDGE_FACTOR * self.h
        if not (bad_angle.any() or bad_edge.any()):
            return False
        drop: set[int] = set()
        extra = []
        for t in np.flatnonzero(bad_angle | bad_edge):
            nodes = triangles[t]
            inner = nodes[nodes >= self.n_b]
            if bad_edge[t] or len(inner) == 0:
                extra.append(pts[nodes].mean(axis=0))
                continue
            dist, _ = self.wall.query(pts[inner])
            drop.add(int(inner[np.argmin(dist)]))
        keep = np.ones(len(self.interior), dtype=bool)
        keep[[d - self.n_b for d in drop]] = False
        interior = self.interior[keep]
        if extra:
            extra = np.array(extra)
            interior = np.vstack([interior, extra[self.inside(extra, 0.3 * self.h)]])
        self.interior = interior
        return True


def generate_mesh(curve: BoundaryCurve, h: float, smoothing_rounds: int = 4, repair_rounds: int = 8) -> TriangleMesh:
    """Triangulate the region enclosed by the curve with target edge length h."""
    if not h > 0:
        raise MeshFailure(f"target edge length must be positive, got {h!r}")
    curve.check_simple()
    logger.message("Starting").subject("mesh").details(curve=curve.label, h=h).log("info")

    n_b = max(MIN_BOUNDARY_NODES, math.ceil(curve.length / h))
    boundary, kappa_E, nu_E = curve.evaluate(curve.arclength_parameters(n_b))
    builder = _Builder(boundary, curve, h)
    lattice = _hex_lattice(boundary.min(axis=0), boundary.max(axis=0), h)
    builder.interior = lattice[builder.inside(lattice, 0.5 * h)]

    triangles = builder.triangulate()
    triangles = builder.smooth(triangles, smoothing_rounds)
    for round_ in range(repair_rounds):
        if not builder.repair(triangles):
            break
        triangles = builder.smooth(builder.triangulate(), 2)
        logger.message("Processing").subject("mesh").details(repair_round=round_ + 1).log("debug")
    else:
        if builder.repair(triangles):
            raise MeshFailure(
                f"quality targets (min angle {MIN_ANGLE_DEG} deg, max edge {MAX_EDGE_FACTOR}h) "
                f"not reached after {repair_rounds} repair rounds"
            )

    vertices = builder.points
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    if not used[:n_b].all():
        raise MeshFailure("a boundary node is not attached to any triangle")
    remap = np.cumsum(used) - 1
    vertices, triangles = vertices[used], remap[triangles]

    mesh = TriangleMesh(
        vertices=vertices,
        triangles=triangles,
        boundary_vertices=np.arange(n_b),
        boundary_kappa_E=kappa_E,
        boundary_nu_E=nu_E,
        h=float(h),
        rotation=curve.rotation,
        label=curve.label,
    )
    n_components, _ = connected_components(mesh.adjacency, directed=False)
    if n_components != 1 or mesh.euler_characteristic() != 1:
        raise MeshFailure(
            f"mesh is not a disk: components={n_components}, V-E+F={mesh.euler_characteristic()}"
        )
    logger.message("Finished").subject("mesh").details(
        vertices=mesh.n_vertices, triangles=len(triangles), min_angle=mesh.min_angle_degrees(),
        max_edge=mesh.max_edge_length(),
    ).log("info")
    return mesh
