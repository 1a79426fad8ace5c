import math
import numpy as np
import pytest

from core.geometry.stereo import SOUTH_POLE
from core.mesh.domain import GeodesicBall, SphericalEllipse, planarize
from core.mesh.generator import TriangleMesh, generate_mesh
from core.solver.assembly import assemble
from core.solver.fields import ScalarField
from core.solver.regimes import solve, solve_eigen

QUARTER = math.pi / 4


def ball_mesh_for(R: float, h: float) -> TriangleMesh:
    return generate_mesh(planarize(GeodesicBall(center=SOUTH_POLE, radius=R)), h)


def radial_field(mesh: TriangleMesh, profile, p: float = 0.0) -> ScalarField:
    """Nodal values of a radial profile u(r), r the geodesic distance to the chart center."""
    r = np.arccos(np.clip(-mesh.chart_sphere_points[:, 2], -1.0, 1.0))
    values = profile(r)
    values[mesh.boundary_vertices] = 0.0
    return ScalarField(mesh=mesh, values=values, quantity="u", p=p)


def torsion_profile(R: float):
    return lambda r: 2.0 * np.log(np.cos(0.5 * r) / math.cos(0.5 * R))


@pytest.fixture(scope="session")
def coarse_mesh() -> TriangleMesh:
    return ball_mesh_for(QUARTER, 0.05)


@pytest.fixture(scope="session")
def ball_mesh() -> TriangleMesh:
    return ball_mesh_for(QUARTER, 0.02)


@pytest.fixture(scope="session")
def ball_assembly(ball_mesh):
    return assemble(ball_mesh)


@pytest.fixture(scope="session")
def ball_solutions(ball_mesh, ball_assembly) -> dict:
    """p -> (field, report) on the ball of radius pi/4."""
    return {p: solve(ball_mesh, p, ball_assembly) for p in (0.0, 0.5, 2.0)}


@pytest.fixture(scope="session")
def ball_eigen(ball_mesh, ball_assembly):
    return solve_eigen(ball_mesh, ball_assembly)


@pytest.fixture(scope="session")
def ellipse_mesh() -> TriangleMesh:
    return generate_mesh(planarize(SphericalEllipse(a=math.pi / 4, b=math.pi / 6)), 0.02)


@pytest.fixture(scope="session")
def torsion_exact(ball_mesh) -> ScalarField:
    return radial_field(ball_mesh, torsion_profile(QUARTER))


@pytest.fixture(scope="session")
def hemisphere_eigen():
    """First eigenpair on the hemisphere, where u1 = -z and lambda = 2."""
    return solve_eigen(ball_mesh_for(math.pi / 2, 0.02))
