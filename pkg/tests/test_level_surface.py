import math

import numpy as np
import pytest

from layerpot.errors import ChartConditionError, DegenerateGradientError, ProjectionError
from layerpot.level_surface import (
    SampledLevelSurface,
    chart_geometry,
    closest_point,
    mean_curvature,
    normal,
    resolution_limit,
    surface_laplacian_coeffs,
)
from layerpot.surface_quadrature import generate_nodes
from layerpot.surfaces import Cassini, Plane, Torus

THETA = math.radians(70.0)


def on_surface(surface, directions):
    u = np.asarray(directions, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    scale = np.sqrt(np.einsum("ti,ij,tj->t", u, surface.matrix, u))
    return u / scale[:, None]


def test_sphere_normal_and_curvature(sphere):
    x = np.array([[0.0, 0.0, 1.0], [0.6, 0.0, 0.8]])
    assert np.allclose(normal(sphere, x), x)
    assert np.allclose(mean_curvature(sphere, x), -1.0)
    assert mean_curvature(sphere, x[0]) == pytest.approx(-1.0)


def test_torus_outer_equator_curvature():
    torus = Torus(a=0.3, c=0.7)
    assert mean_curvature(torus, [1.0, 0.0, 0.0]) == pytest.approx(-(1 / 0.3 + 1.0) / 2)
    # inner equator: the two principal curvatures have opposite signs
    assert mean_curvature(torus, [0.4, 0.0, 0.0]) == pytest.approx(-(1 / 0.3 - 1 / 0.4) / 2)


def test_degenerate_gradient(sphere):
    with pytest.raises(DegenerateGradientError) as excinfo:
        normal(sphere, [0.0, 0.0, 0.0])
    assert excinfo.value.gradient_norm == 0.0


def test_closest_point_sphere(sphere):
    u = np.array([[1.0, 2.0, 2.0], [0.0, -3.0, 4.0]]) / np.array([[3.0], [5.0]])
    x = np.vstack([1.2 * u[0], 0.9 * u[1]])
    frame = closest_point(sphere, x, delta=0.1)
    assert np.allclose(frame.z, u, atol=1e-12)
    assert np.allclose(frame.b, [0.2, -0.1], atol=1e-12)
    assert np.allclose(frame.lam, [2.0, -1.0], atol=1e-10)
    assert np.allclose(frame.H, -1.0)


def test_closest_point_ellipsoid(ellipsoid):
    rng = np.random.default_rng(3)
    z0 = on_surface(ellipsoid, rng.normal(size=(25, 3)))
    n0 = normal(ellipsoid, z0)
    b0 = rng.uniform(-0.1, 0.1, size=25)
    frame = closest_point(ellipsoid, z0 + b0[:, None] * n0, delta=0.05)
    assert np.allclose(frame.z, z0, atol=1e-10)
    assert np.allclose(frame.b, b0, atol=1e-10)
    assert np.max(np.abs(ellipsoid.phi(frame.z))) < 1e-11


def test_closest_point_single_point(sphere):
    frame = closest_point(sphere, [0.0, 0.0, 1.05], delta=0.1)
    assert frame.z.shape == (3,)
    assert frame.b == pytest.approx(0.05)


def test_closest_point_reports_failure(ellipsoid):
    with pytest.raises(ProjectionError) as excinfo:
        closest_point(ellipsoid, [[0.3, 0.9, 0.2]], delta=0.1, max_iter=0)
    assert excinfo.value.iterations == 0


def test_chart_geometry_on_sphere(sphere):
    s = 1 / math.sqrt(2)
    geom = chart_geometry(sphere, [0.0, s, s], axis=2, h=0.1)
    assert np.allclose(geom.g, [[1.0, 0.0], [0.0, 2.0]])
    assert np.allclose(geom.g_inv, [[1.0, 0.0], [0.0, 0.5]])
    assert geom.sqrt_g == pytest.approx(math.sqrt(2))
    assert geom.gamma == pytest.approx(s)
    assert geom.mean_curvature == pytest.approx(-1.0)
    assert geom.gauss_curvature == pytest.approx(1.0)
    assert np.allclose(geom.nu, [0.0, s / 0.1 - math.floor(s / 0.1)])


def test_chart_outside_its_cap(sphere):
    with pytest.raises(ChartConditionError) as excinfo:
        chart_geometry(sphere, [0.0, 0.0, 1.0], axis=0, h=0.1, theta=THETA)
    assert excinfo.value.axis == 0


def test_monge_curvature_matches_level_set(ellipsoid):
    rng = np.random.default_rng(11)
    z = on_surface(ellipsoid, rng.normal(size=(40, 3)))
    n = normal(ellipsoid, z)
    level_set = mean_curvature(ellipsoid, z)
    for k in range(3):
        rows = np.abs(n[:, k]) >= math.cos(THETA)
        if not rows.any():
            continue
        geom = chart_geometry(ellipsoid, z[rows], k, h=0.05, theta=THETA)
        assert np.allclose(geom.mean_curvature, level_set[rows], atol=1e-10)


def test_surface_laplacian_of_coordinate_on_sphere(sphere):
    # Delta_S x3 = 2 H n3 = -2 x3 on the unit sphere; in chart 2, x3 = f(alpha)
    z = np.array([[0.1, 0.2, math.sqrt(0.95)]])
    geom = chart_geometry(sphere, z, 2, h=0.1)
    g_inv, c = surface_laplacian_coeffs(sphere, z, 2)
    lap = np.einsum("tij,tij->t", g_inv, geom.f_hess) + np.einsum("ti,ti->t", c, geom.f_grad)
    assert lap[0] == pytest.approx(-2 * z[0, 2])


def test_resolution_limit_sphere(sphere):
    pts = np.array([[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]])
    c1, c2, h0 = resolution_limit(sphere, pts, THETA)
    assert c1 == pytest.approx(2.0)
    assert c2 == pytest.approx(2.0)
    assert h0 == pytest.approx(2 * math.cos(THETA))


def test_plane_has_no_curvature():
    geom = chart_geometry(Plane(0.25), [0.33, -0.41, 0.25], axis=2, h=0.1)
    assert np.allclose(geom.g, np.eye(2))
    assert geom.mean_curvature == 0.0
    assert np.allclose(geom.nu, [0.3, 0.9])


def test_sampled_surface_follows_analytic(sphere):
    sampled = SampledLevelSurface.from_surface(sphere, half_width=2.0, n=40)
    rng = np.random.default_rng(5)
    x = rng.normal(size=(30, 3))
    x = x / np.linalg.norm(x, axis=1, keepdims=True) * rng.uniform(0.9, 1.1, size=(30, 1))
    assert np.allclose(sampled.phi(x), sphere.phi(x), atol=1e-4)
    assert np.allclose(normal(sampled, x), normal(sphere, x), atol=1e-4)
    assert np.allclose(mean_curvature(sampled, x), mean_curvature(sphere, x), atol=1e-2)


def test_normals_of_plane_and_torus():
    assert np.allclose(normal(Plane(), [0.3, -2.0, 0.0]), [0.0, 0.0, 1.0])
    assert np.allclose(normal(Torus(a=0.3, c=0.7), [1.0, 0.0, 0.0]), [1.0, 0.0, 0.0])


def test_closest_point_on_cassini_beats_dense_cloud():
    cassini = Cassini(a=0.65, b=0.7)
    cloud = generate_nodes(cassini, 2.2 / 128, THETA, 1.1).pos
    rng = np.random.default_rng(21)
    start = cloud[rng.choice(len(cloud), 8, replace=False)]
    x = start + rng.uniform(-0.05, 0.05, size=start.shape)
    frame = closest_point(cassini, x, delta=0.05)
    assert np.max(np.abs(cassini.phi(frame.z))) < 1e-12
    # x - z is normal to the surface
    assert np.allclose(np.cross(x - frame.z, frame.n), 0.0, atol=1e-10)
    nearest = np.min(np.linalg.norm(cloud[None, :, :] - x[:, None, :], axis=-1), axis=1)
    assert np.all(np.abs(frame.b) <= nearest + 1e-9)
