import math
import numpy as np
import pytest
from matplotlib.path import Path as PolygonPath
from scipy.spatial import cKDTree

from core.errors import MeshFailure, NotInDisk, SelfIntersection
from core.geometry.stereo import PlanarPoint, SpherePoint, metric_inner
from core.mesh.boundary import boundary_distance, fermi_frame, fermi_frames
from core.mesh.domain import GeodesicBall, PlanarConvexCurve, SphericalEllipse, planarize
from core.mesh.generator import MAX_EDGE_FACTOR, MIN_ANGLE_DEG, generate_mesh
from tests.conftest import QUARTER, ball_mesh_for


def _samples(points) -> list[PlanarPoint]:
    return [PlanarPoint(X=float(x), Y=float(y)) for x, y in points]


def test_ball_planarizes_to_circle():
    curve = planarize(GeodesicBall(radius=QUARTER), 64)
    radius = np.linalg.norm(curve.samples, axis=1)
    assert radius == pytest.approx(np.full(64, math.tan(QUARTER / 2)), rel=1e-12)
    assert curve.kappa_E == pytest.approx(np.full(64, 1.0 / math.tan(QUARTER / 2)), rel=1e-9)
    assert curve.signed_area() > 0


def test_off_pole_ball_is_recentered():
    center = SpherePoint.from_vector([0.5, 0.2, -0.6])
    curve = planarize(GeodesicBall(center=center, radius=0.5), 64)
    radius = np.linalg.norm(curve.samples, axis=1)
    assert radius == pytest.approx(np.full(64, math.tan(0.25)), rel=1e-9)


def test_ball_past_equator_leaves_the_disk():
    with pytest.raises(NotInDisk):
        planarize(GeodesicBall(radius=2 * math.pi / 3))


def test_figure_eight_is_rejected():
    t = 2 * np.pi * (np.arange(16) + 0.5) / 16
    points = 0.5 * np.stack([np.cos(t), 0.5 * np.sin(2 * t)], axis=1)
    with pytest.raises(SelfIntersection):
        planarize(PlanarConvexCurve(samples=_samples(points)))


def test_clockwise_samples_are_reoriented():
    t = -2 * np.pi * np.arange(24) / 24
    points = 0.4 * np.stack([np.cos(t), np.sin(t)], axis=1)
    curve = planarize(PlanarConvexCurve(samples=_samples(points)), 128)
    assert curve.signed_area() > 0
    assert np.linalg.norm(curve.samples, axis=1) == pytest.approx(np.full(128, 0.4), rel=2e-3)


def test_mesh_quality(coarse_mesh):
    mesh = coarse_mesh
    assert np.all(mesh.signed_areas() > 0)
    assert mesh.min_angle_degrees() >= MIN_ANGLE_DEG
    assert mesh.max_edge_length() <= MAX_EDGE_FACTOR * mesh.h
    assert mesh.euler_characteristic() == 1


def test_boundary_vertices_come_first_and_lie_on_the_curve(coarse_mesh):
    mesh = coarse_mesh
    B = len(mesh.boundary_vertices)
    assert np.array_equal(mesh.boundary_vertices, np.arange(B))
    r = np.linalg.norm(mesh.vertices[:B], axis=1)
    assert r == pytest.approx(np.full(B, math.tan(QUARTER / 2)), rel=1e-12)
    assert np.all(np.linalg.norm(mesh.vertices[B:], axis=1) < math.tan(QUARTER / 2))


def test_refinement_quadruples_vertex_count(coarse_mesh):
    fine = ball_mesh_for(QUARTER, 0.025)
    assert 3.2 <= fine.n_vertices / coarse_mesh.n_vertices <= 4.8


def test_ellipse_mesh_is_valid(ellipse_mesh):
    assert ellipse_mesh.euler_characteristic() == 1
    assert ellipse_mesh.min_angle_degrees() >= MIN_ANGLE_DEG


def test_nonpositive_h_fails():
    curve = planarize(GeodesicBall(radius=QUARTER), 64)
    with pytest.raises(MeshFailure):
        generate_mesh(curve, 0.0)


def test_neighbors_and_rings(coarse_mesh):
    i = int(coarse_mesh.interior_indices[0])
    one = set(coarse_mesh.neighbors(i).tolist())
    two = set(coarse_mesh.ring(i, 2).tolist())
    assert one <= two
    assert i not in two
    assert len(one) >= 3


def test_boundary_distance_matches_radial_gap(coarse_mesh):
    mesh = coarse_mesh
    d = boundary_distance(mesh).values
    r = np.arccos(np.clip(-mesh.chart_sphere_points[:, 2], -1.0, 1.0))
    assert np.all(d[mesh.boundary_vertices] == 0.0)
    assert np.max(np.abs(d - (QUARTER - r))) <= mesh.h


def test_fermi_frame_is_orthonormal_and_inward(coarse_mesh):
    frame = fermi_frame(coarse_mesh, 3)
    q = frame.base.as_array()
    assert metric_inner(q, frame.tau, frame.tau) == pytest.approx(1.0)
    assert metric_inner(q, frame.eta, frame.eta) == pytest.approx(1.0)
    assert metric_inner(q, frame.tau, frame.eta) == pytest.approx(0.0, abs=1e-14)
    assert float(np.dot(frame.eta, q)) < 0
    assert frame.kappa_tilde == pytest.approx(1.0 / math.tan(QUARTER), rel=1e-9)


def test_fermi_frames_cover_the_boundary(coarse_mesh):
    assert len(fermi_frames(coarse_mesh)) == len(coarse_mesh.boundary_vertices)
    with pytest.raises(IndexError):
        fermi_frame(coarse_mesh, len(coarse_mesh.boundary_vertices))


def test_ellipse_axes_are_half_angle_tangents():
    curve = planarize(SphericalEllipse(a=math.pi / 4, b=math.pi / 6), 256)
    assert curve.samples[:, 0].max() == pytest.approx(math.tan(math.pi / 8), rel=1e-6)
    assert curve.samples[:, 1].max() == pytest.approx(math.tan(math.pi / 12), rel=1e-3)


@pytest.mark.parametrize("mesh_name", ["coarse_mesh", "ellipse_mesh"])
def test_vertices_stay_inside_the_boundary_polygon(request, mesh_name):
    mesh = request.getfixturevalue(mesh_name)
    B = len(mesh.boundary_vertices)
    polygon = PolygonPath(np.vstack([mesh.vertices[:B], mesh.vertices[:1]]), closed=True)
    assert polygon.contains_points(mesh.vertices[B:]).all()
    wall = cKDTree(mesh.vertices[:B])
    assert wall.query(mesh.vertices[B:])[0].min() > 0.2 * mesh.h


def test_ball_vertices_stay_in_the_cap(coarse_mesh):
    r = np.arccos(np.clip(-coarse_mesh.chart_sphere_points[:, 2], -1.0, 1.0))
    assert r.max() <= QUARTER + 1e-12
