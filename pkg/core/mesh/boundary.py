# core/mesh/boundary.py
"""Distance to the boundary on S^2 and boundary-adapted (Fermi) frames."""
import numpy as np
from scipy.spatial import cKDTree

from core.geometry.stereo import PlanarPoint, boundary_curvature_array, rho_squared
from core.mesh.generator import TriangleMesh
from core.solver.fields import ScalarField
from core.utils.models import ArrayModel


class FermiFrame(ArrayModel):
    """Frame {tau, eta} at a boundary vertex.

    tau and eta are chart vectors of unit length in the conformal metric; tau turns
    counterclockwise and eta points into the domain.
    """
    base: PlanarPoint
    tau: np.ndarray
    eta: np.ndarray
    kappa_tilde: float

    def components(self) -> tuple[np.ndarray, np.ndarray]:
        """tau and eta expressed in the orthonormal frame (d/dX, d/dY) / rho."""
        rho = float(np.sqrt(rho_squared(self.base.as_array())))
        return rho * self.tau, rho * self.eta


def sphere_distance_to(points: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Great-circle distance from each point to the nearest target, and that target's index."""
    chord, nearest = cKDTree(targets).query(points)
    return 2.0 * np.arcsin(np.clip(0.5 * chord, 0.0, 1.0)), nearest


def boundary_distance(mesh: TriangleMesh) -> ScalarField:
    """Geodesic distance on S^2 from each vertex to the nearest boundary vertex."""
    pts = mesh.chart_sphere_points
    d, _ = sphere_distance_to(pts, pts[mesh.boundary_vertices])
    d[mesh.boundary_vertices] = 0.0
    return ScalarField(mesh=mesh, values=d, quantity="distance")


def fermi_frame(mesh: TriangleMesh, boundary_index: int) -> FermiFrame:
    if not 0 <= boundary_index < len(mesh.boundary_vertices):
        raise IndexError(f"boundary index {boundary_index} out of range")
    q = mesh.vertices[mesh.boundary_vertices[boundary_index]]
    nu = mesh.boundary_nu_E[boundary_index]
    rho = float(np.sqrt(rho_squared(q)))
    tangent = np.array([-nu[1], nu[0]])
    kappa = float(boundary_curvature_array(q, mesh.boundary_kappa_E[boundary_index], nu))
    return FermiFrame(
        base=PlanarPoint(X=float(q[0]), Y=float(q[1])),
        tau=tangent / rho,
        eta=-nu / rho,
        kappa_tilde=kappa,
    )


def fermi_frames(mesh: TriangleMesh) -> list[FermiFrame]:
    return [fermi_frame(mesh, i) for i in range(len(mesh.boundary_vertices))]
