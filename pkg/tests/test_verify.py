import math
import numpy as np
import pytest

from core.errors import EmptyInterior, EmptyLevel, LayerTooThin, NonPositive
from core.geometry.stereo import PlanarPoint, check_uniform_convexity, lift_array
from core.mesh.boundary import boundary_distance
from core.mesh.domain import GeodesicBall, PlanarConvexCurve, planarize
from core.mesh.generator import TriangleMesh, generate_mesh
from core.oracle.radial import radial_shoot
from core.solver.fields import ScalarField
from core.solver.regimes import SolverOptions, solve, solve_eigen
from core.verify.critical import critical_points
from core.verify.engine import VerifySettings, expected_definiteness, verify_solution
from core.verify.hessian import (
    covariant_hessian, geodesic_second_difference, hessian_of_transform, power_transform, recover_derivatives,
    transform_exponent,
)
from core.verify.layer import boundary_layer_check
from core.verify.levels import level_curvature, level_set_duality
from core.verify.report import definiteness_report
from core.verify.residual import pde_residual
from tests.conftest import QUARTER, ball_mesh_for


def _height(mesh) -> ScalarField:
    return ScalarField(mesh=mesh, values=mesh.chart_sphere_points[:, 2].copy(), quantity="v")


def test_height_function_hessian_is_minus_z_times_metric(ball_mesh):
    z = _height(ball_mesh)
    hess = covariant_hessian(ball_mesh, z)
    far = boundary_distance(ball_mesh).values >= 3 * ball_mesh.h
    zz = z.values[far]
    assert np.max(np.abs(hess.A[far] + zz)) <= 5e-3
    assert np.max(np.abs(hess.C[far] + zz)) <= 5e-3
    assert np.max(np.abs(hess.B[far])) <= 5e-3


def test_hessian_agrees_with_geodesic_second_difference(ball_mesh):
    a = np.array([0.3, -0.4, 0.5])

    def linear(q):
        return lift_array(q) @ a

    field = ScalarField(mesh=ball_mesh, values=linear(ball_mesh.vertices), quantity="v")
    hess = covariant_hessian(ball_mesh, field)
    rng = np.random.default_rng(7)
    far = np.flatnonzero(boundary_distance(ball_mesh).values >= 3 * ball_mesh.h)
    idx = rng.choice(far, size=20, replace=False)
    angle = rng.uniform(0, 2 * np.pi, size=20)
    w = np.stack([np.cos(angle), np.sin(angle)], axis=1)
    fitted = hess.quadratic_form(w, idx)
    oracle = geodesic_second_difference(linear, ball_mesh.vertices[idx], w, 1e-3)
    scale = np.max(np.abs(field.values))
    assert np.max(np.abs(fitted - oracle)) <= max(5e-3, 10 * ball_mesh.h ** 2) * scale
    # a restricted linear function satisfies Hess f = -f g
    assert oracle == pytest.approx(-linear(ball_mesh.vertices[idx]), abs=1e-5)


def test_trace_identity_for_exact_torsion(torsion_exact):
    residuals = pde_residual(torsion_exact, 0.0, exclusion_margin=0.1)
    assert residuals.pde_residual_L2 <= 1e-2
    assert residuals.deltav_residual_L2 <= 1e-2


def test_transform_exponent():
    assert transform_exponent(0.0) == 0.5
    assert transform_exponent(3.0) == -1.0
    assert transform_exponent(1.0) is None


def test_power_transform_needs_positive_interior(coarse_mesh):
    values = np.full(coarse_mesh.n_vertices, -1.0)
    with pytest.raises(NonPositive):
        power_transform(ScalarField(mesh=coarse_mesh, values=values), 0.5)


def test_power_transform_marks_boundary_invalid_beyond_one(ball_solutions):
    u, _ = ball_solutions[2.0]
    v = power_transform(u, 2.0)
    assert not v.valid_mask[u.mesh.boundary_vertices].any()
    assert v.quantity == "v"


@pytest.mark.parametrize("p", [0.0, 0.5, 2.0])
def test_definiteness_on_the_ball(ball_mesh, ball_solutions, p):
    u, _ = ball_solutions[p]
    _, hess_v = hessian_of_transform(u, p)
    result = definiteness_report(hess_v, boundary_distance(ball_mesh), 3 * ball_mesh.h)
    assert result.definiteness == expected_definiteness(p)
    assert result.min_abs_phi > result.epsilon_def ** 2
    assert result.rank_field_summary.rank0 == 0
    assert result.rank_field_summary.rank1 == 0


@pytest.mark.parametrize("fit_degree", [2, 3])
def test_fits_reproduce_chart_quadratics(ball_mesh, fit_degree):
    X, Y = ball_mesh.vertices[:, 0], ball_mesh.vertices[:, 1]
    values = 1.0 + 2.0 * X - Y + 1.5 * X ** 2 + 0.7 * X * Y - 0.4 * Y ** 2
    grad, hess, _ = recover_derivatives(ball_mesh, values, fit_degree=fit_degree)
    inner = ball_mesh.interior_indices
    assert grad[inner] == pytest.approx(np.column_stack([2.0 + 3.0 * X + 0.7 * Y, -1.0 + 0.7 * X - 0.8 * Y])[inner], abs=1e-8)
    assert hess[inner] == pytest.approx(np.tile([3.0, 0.7, -0.8], (len(inner), 1)), abs=1e-6)


def test_quadratic_fit_gives_the_same_verdict(ball_mesh, ball_solutions):
    u, _ = ball_solutions[0.5]
    _, hess_v = hessian_of_transform(u, 0.5, fit_degree=2)
    result = definiteness_report(hess_v, boundary_distance(ball_mesh), 0.1)
    assert result.definiteness == "negative_definite"


def test_chain_and_direct_modes_agree_in_sign(ball_mesh, ball_solutions):
    u, _ = ball_solutions[0.5]
    distance = boundary_distance(ball_mesh)
    direct = definiteness_report(hessian_of_transform(u, 0.5, mode="direct")[1], distance, 0.1)
    assert direct.definiteness == "negative_definite"


def test_empty_interior(ball_mesh, ball_solutions):
    u, _ = ball_solutions[0.0]
    _, hess_v = hessian_of_transform(u, 0.0)
    with pytest.raises(EmptyInterior):
        definiteness_report(hess_v, boundary_distance(ball_mesh), 10.0)


def test_level_curvature_of_geodesic_circles(ball_mesh, torsion_exact):
    top = float(torsion_exact.values.max())
    c = 0.5 * top
    # u(r) = c on the circle 2 ln(cos(r/2) / cos(R/2)) = c
    r_c = 2 * math.acos(math.cos(QUARTER / 2) * math.exp(c / 2))
    curve = level_curvature(ball_mesh, torsion_exact, c)
    assert len(curve.loops) == 1
    assert curve.kappa_g == pytest.approx(np.full(len(curve.kappa_g), 1.0 / math.tan(r_c)), rel=5e-2)
    assert curve.result(0.5).convex


def test_level_above_max_is_empty(ball_mesh, torsion_exact):
    with pytest.raises(EmptyLevel):
        level_curvature(ball_mesh, torsion_exact, 2 * float(torsion_exact.values.max()))
    with pytest.raises(EmptyLevel):
        level_curvature(ball_mesh, torsion_exact, 0.0)


@pytest.mark.parametrize("p", [0.5, 2.0])
def test_superlevel_sets_are_dual(ball_solutions, p):
    u, _ = ball_solutions[p]
    v = power_transform(u, p)
    assert level_set_duality(u, v, p, 0.5 * float(u.values.max())).agree


def test_single_maximum_at_the_center(ball_mesh, ball_solutions):
    u, _ = ball_solutions[0.5]
    points = critical_points(ball_mesh, u)
    assert len(points) == 1
    assert points[0].type == "max"
    assert np.hypot(*points[0].location) <= 2 * ball_mesh.h


@pytest.mark.parametrize("p", [0.0, 0.5, 2.0])
def test_boundary_layer_signs(ball_mesh, ball_solutions, p):
    u, _ = ball_solutions[p]
    result = boundary_layer_check(ball_mesh, u, p, 0.15)
    assert result.passed
    assert result.u_tautau_negative
    assert result.v_definite
    assert result.u_etaeta_enforced == (p > 1)
    assert result.kappa0 == pytest.approx(1.0 / math.tan(QUARTER), rel=1e-6)
    assert result.a0 > 0
    if p > 1:
        assert result.u_etaeta_positive


def test_thin_layer_is_rejected(ball_mesh, ball_solutions):
    u, _ = ball_solutions[2.0]
    with pytest.raises(LayerTooThin):
        boundary_layer_check(ball_mesh, u, 2.0, 2 * ball_mesh.h)


def test_full_verification_of_sublinear_solution(ball_solutions):
    u, report = ball_solutions[0.5]
    result = verify_solution(u, 0.5, seed=3, convexity="uniformly_convex", certified=report.certified)
    assert result.definiteness == "negative_definite"
    assert result.transform == "power"
    assert result.direction_probe.violations == 0
    assert result.direction_probe.samples == 20
    assert len(result.level_set_results) == 5
    assert all(level.min_kappa_g > 0 for level in result.level_set_results)
    assert result.passed, [k for k, ok in result.verdicts.items() if not ok]


def test_verification_is_deterministic(ball_solutions):
    u, _ = ball_solutions[2.0]
    settings = VerifySettings(boundary_layer=False)
    first = verify_solution(u, 2.0, settings, seed=11)
    second = verify_solution(u, 2.0, settings, seed=11)
    assert first.model_dump_json() == second.model_dump_json()
    assert first.definiteness == "positive_definite"


def test_log_concavity_of_eigenfunction(ball_eigen):
    _, u1, _ = ball_eigen
    result = verify_solution(u1, 1.0, VerifySettings(boundary_layer=False))
    assert result.transform == "log"
    assert result.definiteness == "negative_definite"
    assert result.log_concavity == "positive_definite"
    assert all(level.convex for level in result.level_set_results)


@pytest.mark.slow
@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 2.0, 3.0])
def test_power_statements_on_the_ellipse(ellipse_mesh, p):
    u, report = solve(ellipse_mesh, p)
    result = verify_solution(u, p, VerifySettings(boundary_layer=False), certified=report.certified)
    assert result.definiteness == expected_definiteness(p)
    assert result.trace_sign_ok
    assert all(level.convex for level in result.level_set_results)
    assert len(result.critical_points) == 1 and result.critical_points[0].type == "max"


@pytest.mark.slow
@pytest.mark.parametrize("p", [3.0, 4.0])
def test_boundary_layer_for_large_exponents(ball_mesh, ball_assembly, p):
    u, _ = solve(ball_mesh, p, ball_assembly, SolverOptions(experimental_p=True))
    result = boundary_layer_check(ball_mesh, u, p, 0.15)
    assert result.passed and result.u_etaeta_positive


def _rotated_ellipse(theta: float, n: int = 64) -> PlanarConvexCurve:
    t = 2 * np.pi * np.arange(n) / n
    X, Y = math.tan(math.pi / 8) * np.cos(t), math.tan(math.pi / 12) * np.sin(t)
    c, s = math.cos(theta), math.sin(theta)
    return PlanarConvexCurve(samples=[PlanarPoint(X=c * x - s * y, Y=s * x + c * y) for x, y in zip(X, Y)])


def _rotated(location, theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]]) @ np.asarray(location)


def test_rigid_rotation_leaves_results_unchanged():
    theta = 0.9
    runs = []
    for angle in (0.0, theta):
        mesh = generate_mesh(planarize(_rotated_ellipse(angle)), 0.025)
        lam, _, _ = solve_eigen(mesh)
        u, _ = solve(mesh, 0.5)
        runs.append((mesh, lam, u, verify_solution(u, 0.5, VerifySettings(boundary_layer=False))))
    (mesh, lam, u, report), (_, lam_rot, u_rot, report_rot) = runs
    assert lam_rot == pytest.approx(lam, rel=5e-3)
    assert u_rot.values.max() == pytest.approx(u.values.max(), rel=5e-3)
    assert report_rot.verdicts == report.verdicts
    assert report_rot.definiteness == report.definiteness
    for level, level_rot in zip(report.level_set_results, report_rot.level_set_results):
        assert level_rot.convex == level.convex
        assert level_rot.min_kappa_g == pytest.approx(level.min_kappa_g, rel=0.1)
    assert len(report.critical_points) == len(report_rot.critical_points) == 1
    moved = _rotated(report.critical_points[0].location, theta)
    assert np.linalg.norm(moved - np.asarray(report_rot.critical_points[0].location)) <= 2 * mesh.h


def test_hessian_samples_do_not_depend_on_the_chart_frame(ellipse_mesh):
    theta = 1.3
    c, s = math.cos(theta), math.sin(theta)
    turn = np.array([[c, -s], [s, c]])
    rotated = TriangleMesh(
        vertices=ellipse_mesh.vertices @ turn.T,
        triangles=ellipse_mesh.triangles,
        boundary_vertices=ellipse_mesh.boundary_vertices,
        boundary_kappa_E=ellipse_mesh.boundary_kappa_E,
        boundary_nu_E=ellipse_mesh.boundary_nu_E @ turn.T,
        h=ellipse_mesh.h,
    )
    # the same nodal values describe f composed with the rotation about the polar axis
    values = np.exp(lift_array(ellipse_mesh.vertices) @ np.array([0.4, -0.3, 0.8]))
    original = covariant_hessian(ellipse_mesh, ScalarField(mesh=ellipse_mesh, values=values, quantity="v"))
    turned = covariant_hessian(rotated, ScalarField(mesh=rotated, values=values, quantity="v"))
    idx = np.flatnonzero(original.valid & turned.valid)
    assert len(idx) > 0.9 * ellipse_mesh.n_vertices
    scale = float(np.max(np.abs(original.trace[idx])))
    for first, second in zip(original.eigenvalues(), turned.eigenvalues()):
        assert second[idx] == pytest.approx(first[idx], rel=1e-6, abs=1e-9 * scale)
    assert turned.trace[idx] == pytest.approx(original.trace[idx], rel=1e-6, abs=1e-9 * scale)
    assert turned.phi[idx] == pytest.approx(original.phi[idx], rel=1e-6, abs=1e-9 * scale ** 2)


def test_solved_v_agrees_with_geodesic_second_difference(ball_mesh, ball_solutions):
    u, _ = ball_solutions[2.0]
    _, hess_v = hessian_of_transform(u, 2.0, mode="chain")
    radial = radial_shoot(QUARTER, 2.0)

    def v(q):
        r = np.arccos(np.clip(-lift_array(q)[..., 2], -1.0, 1.0))
        return radial.evaluate(r) ** -0.5

    rng = np.random.default_rng(17)
    far = np.flatnonzero(hess_v.valid & (boundary_distance(ball_mesh).values >= 0.15))
    idx = rng.choice(far, size=20, replace=False)
    angle = rng.uniform(0, 2 * np.pi, size=20)
    w = np.stack([np.cos(angle), np.sin(angle)], axis=1)
    fitted = hess_v.quadratic_form(w, idx)
    oracle = geodesic_second_difference(v, ball_mesh.vertices[idx], w, 1e-3)
    assert np.all(oracle > 0)
    assert np.max(np.abs(fitted - oracle)) <= 1e-2 * np.max(np.abs(oracle))


@pytest.mark.parametrize("p", [0.0, 1.0, 2.0, pytest.param(3.0, marks=pytest.mark.slow)])
def test_one_maximum_on_the_ball_for_each_exponent(ball_mesh, ball_assembly, ball_solutions, ball_eigen, p):
    if p == 1.0:
        u = ball_eigen[1]
    elif p in ball_solutions:
        u = ball_solutions[p][0]
    else:
        u, _ = solve(ball_mesh, p, ball_assembly)
    points = critical_points(ball_mesh, u)
    assert len(points) == 1
    assert points[0].type == "max"
    assert np.hypot(*points[0].location) <= 2 * ball_mesh.h


def test_height_function_has_one_critical_point_on_the_hemisphere():
    mesh = ball_mesh_for(math.pi / 2, 0.04)
    depth = ScalarField(mesh=mesh, values=-mesh.chart_sphere_points[:, 2], quantity="u")
    points = critical_points(mesh, depth)
    assert len(points) == 1
    assert points[0].type == "max"
    assert np.hypot(*points[0].location) <= 2 * mesh.h
    assert max(points[0].hessian_eigs) < 0


@pytest.mark.parametrize("p", [0.0, 2.0])
def test_residuals_shrink_under_refinement(coarse_mesh, ball_solutions, p):
    coarse, _ = solve(coarse_mesh, p)
    fine, _ = ball_solutions[p]
    before = pde_residual(coarse, p, exclusion_margin=0.12)
    after = pde_residual(fine, p, exclusion_margin=0.12)
    assert after.pde_residual_L2 < before.pde_residual_L2
    assert after.deltav_residual_L2 < before.deltav_residual_L2


@pytest.mark.slow
def test_hemisphere_eigenfunction_passes_every_verdict(hemisphere_eigen):
    lam, u1, report = hemisphere_eigen
    convexity = check_uniform_convexity(GeodesicBall(radius=math.pi / 2), 256).verdict
    assert convexity == "convex_marginal"
    result = verify_solution(u1, 1.0, convexity=convexity, certified=report.certified)
    assert result.transform == "log"
    assert result.definiteness in ("negative_definite", "semidefinite_marginal")
    assert result.residuals.deltav_residual_L2 <= 5e-2
    assert result.passed, [k for k, ok in result.verdicts.items() if not ok]
