# core/solver/assembly.py
"""P1 finite-element matrices of the weighted planar problems.

K discretizes the Euclidean -Laplacian, M_rho the multiplication by rho^2 and M the plain
L2 mass. The round-sphere problem -Lap_g u = f becomes K u = M_rho f in the chart.
"""
from functools import cached_property
import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from core.geometry.stereo import rho_squared
from core.mesh.generator import TriangleMesh
from core.utils.logging import get_logger
from core.utils.models import ArrayModel

logger = get_logger(__name__)

# interior 3-point rule, exact for quadratics: barycentric points (2/3, 1/6, 1/6), weights 1/3
QUADRATURE_POINTS = np.array([
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
])
QUADRATURE_WEIGHTS = np.full(3, 1.0 / 3.0)


class Assembly(ArrayModel):
    K: csr_matrix
    M_rho: csr_matrix
    M: csr_matrix
    free: np.ndarray

    def restrict(self, A: csr_matrix) -> csr_matrix:
        """Free-free block: symmetric elimination of homogeneous Dirichlet nodes."""
        return A[self.free][:, self.free].tocsr()

    @cached_property
    def K_free(self) -> csr_matrix:
        return self.restrict(self.K)

    @cached_property
    def M_rho_free(self) -> csr_matrix:
        return self.restrict(self.M_rho)

    def extend(self, x_free: np.ndarray, n_vertices: int) -> np.ndarray:
        """Full nodal vector, zero on the Dirichlet nodes."""
        x = np.zeros(n_vertices)
        x[self.free] = x_free
        return x

    def weighted_load(self, f: np.ndarray) -> np.ndarray:
        """Free part of M_rho f for a full nodal vector f."""
        return (self.M_rho @ f)[self.free]


def _scatter(triangles: np.ndarray, local: np.ndarray, n: int) -> csr_matrix:
    rows = np.repeat(triangles, 3, axis=1).ravel()
    cols = np.tile(triangles, (1, 3)).ravel()
    return coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble(mesh: TriangleMesh) -> Assembly:
    pts, tri = mesh.vertices, mesh.triangles
    n = mesh.n_vertices
    p = pts[tri]                                    # (T, 3, 2)
    # edge opposite vertex k
    e = np.roll(p, -2, axis=1) - np.roll(p, -1, axis=1)
    area = mesh.signed_areas()
    stiffness = np.einsum("tid,tjd->tij", e, e) / (4.0 * area[:, None, None])

    mass = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))

    qpts = np.einsum("qk,tkd->tqd", QUADRATURE_POINTS, p)     # (T, 3, 2)
    weight = rho_squared(qpts) * QUADRATURE_WEIGHTS           # (T, 3)
    weighted = area[:, None, None] * np.einsum(
        "tq,qi,qj->tij", weight, QUADRATURE_POINTS, QUADRATURE_POINTS
    )

    result = Assembly(
        K=_scatter(tri, stiffness, n),
        M_rho=_scatter(tri, weighted, n),
        M=_scatter(tri, mass, n),
        free=mesh.interior_indices,
    )
    logger.message("Finished").subject("solve").details(
        assembled=n, free=len(result.free), nnz=result.K.nnz
    ).log("debug")
    return result
