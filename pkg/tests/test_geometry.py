import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_camera, random_rotation
from roomcad.errors import GeometryError
from roomcad.geometry import (
    Camera,
    Plane,
    Ray,
    cast_ray,
    intersect_ray_plane,
    line_intersection_homogeneous,
    look_rotation,
    nearest_rotation,
    project,
)


def test_project_on_optical_axis():
    cam = Camera(1.0, (0, 0), np.eye(3))
    assert np.allclose(project(cam, [0, 0, 1]), [0, 0])


def test_project_closed_form():
    cam = Camera(500.0, (320, 240), np.eye(3))
    assert np.allclose(project(cam, [1, 0, 5]), [420, 240])


def test_project_behind_camera():
    cam = Camera(500.0, (320, 240), np.eye(3))
    with pytest.raises(GeometryError) as e:
        project(cam, [0, 0, -1])
    assert e.value.code == "behind-camera"
    with pytest.raises(GeometryError):
        project(cam, [1, 1, 0])


def test_cast_ray_through_principal_point_is_optical_axis(rng):
    cam = random_camera(rng)
    ray = cast_ray(cam, cam.principal_point)
    assert np.allclose(ray.direction, cam.optical_axis, atol=1e-12)
    assert np.allclose(ray.origin, cam.center)


def test_distinct_pixels_give_non_parallel_rays(rng):
    cam = random_camera(rng)
    a = cast_ray(cam, (10, 20)).direction
    b = cast_ray(cam, (30, 20)).direction
    assert np.linalg.norm(np.cross(a, b)) > 1e-3


def test_round_trip_random(rng):
    worst = 0.0
    for _ in range(1000):
        cam = random_camera(rng)
        p_cam = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 10)])
        p = cam.rotation.T @ p_cam + cam.center
        px = project(cam, p)
        ray = cast_ray(cam, px)
        depth = (ray.direction @ cam.rotation.T)[2]
        q = ray.at(p_cam[2] / depth)
        worst = max(worst, np.linalg.norm(project(cam, q) - px))
        # any t > 0 projects back to the same pixel
        assert np.linalg.norm(project(cam, ray.at(rng.uniform(0.1, 20))) - px) < 1e-6
    assert worst < 1e-6


def test_ray_plane_vertical_drop():
    p = intersect_ray_plane(Ray([0, 0, 1.5], [0, 0, -1]), Plane.ground())
    assert np.allclose(p, 0)


def test_ray_plane_45_degrees():
    s = 1 / math.sqrt(2)
    p = intersect_ray_plane(Ray([0, 0, 2], [s, 0, -s]), Plane.ground())
    assert np.allclose(p, [2, 0, 0], atol=1e-12)


def test_ray_plane_errors():
    with pytest.raises(GeometryError) as e:
        intersect_ray_plane(Ray([0, 0, 1], [1, 0, 0]), Plane.ground())
    assert e.value.code == "no-intersection"
    with pytest.raises(GeometryError) as e:
        intersect_ray_plane(Ray([0, 0, 1], [0, 0, 1]), Plane.ground())
    assert e.value.code == "behind-origin"


def test_ray_plane_extended_precision_oracle(rng):
    for _ in range(1000):
        o = rng.uniform(-5, 5, 3)
        d = rng.normal(size=3)
        n = rng.normal(size=3)
        off = rng.uniform(-3, 3)
        ray, plane = Ray(o, d), Plane(n, off)
        dl = ray.direction.astype(np.longdouble)
        nl = plane.normal.astype(np.longdouble)
        ol = ray.origin.astype(np.longdouble)
        denom = nl @ dl
        t = (np.longdouble(plane.offset) - nl @ ol) / denom
        if abs(float(denom)) <= 1e-9 or t <= 0:
            continue
        expect = ol + t * dl
        got = intersect_ray_plane(ray, plane)
        assert np.all(np.abs(got - expect.astype(float)) <= 1e-9 * max(1.0, float(abs(t))))
        assert abs(plane.normal @ got - plane.offset) <= 1e-9 * max(1.0, float(abs(t)))


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.1, 10),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3),
)
def test_ray_plane_invariant_to_plane_scaling(k, n, d):
    n = np.array(n) + [0, 0, 2.0]
    d = np.array(d) - [0, 0, 2.0]
    ray = Ray([0.3, -0.2, 1.7], d)
    a = intersect_ray_plane(ray, Plane(n, 0.1))
    b = intersect_ray_plane(ray, Plane(k * n, k * 0.1))
    assert np.allclose(a, b, atol=1e-12)


def test_line_intersection_axes():
    p, finite = line_intersection_homogeneous([0, 1, 0], [1, 0, 0])
    assert finite and np.allclose(p, [0, 0])


def test_line_intersection_parallel():
    d, finite = line_intersection_homogeneous([0, 1, 0], [0, 1, -1])
    assert not finite
    assert np.allclose(np.abs(d), [1, 0])


def test_line_intersection_identical():
    with pytest.raises(GeometryError) as e:
        line_intersection_homogeneous([1, 2, 3], [2, 4, 6])
    assert e.value.code == "degenerate"


def test_line_intersection_linear_solve_oracle(rng):
    for _ in range(500):
        l1, l2 = rng.normal(size=3), rng.normal(size=3)
        A = np.array([l1[:2], l2[:2]])
        if abs(np.linalg.det(A)) < 1e-3:
            continue
        expect = np.linalg.solve(A, -np.array([l1[2], l2[2]]))
        p, finite = line_intersection_homogeneous(l1, l2)
        assert finite
        assert np.allclose(p, expect, atol=1e-8 * max(1, np.abs(expect).max()))


def test_camera_rejects_bad_rotation():
    with pytest.raises(GeometryError):
        Camera(500, (0, 0), np.diag([1, 1, 1.1]))
    with pytest.raises(GeometryError):
        Camera(0, (0, 0), np.eye(3))


def test_look_rotation_is_proper_rotation():
    R = look_rotation(0.4, -0.3, 0.05)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(R), 1.0)
    # zero pose looks along +y with image down = world down
    R0 = look_rotation(0, 0)
    assert np.allclose(R0[2], [0, 1, 0]) and np.allclose(R0[1], [0, 0, -1])


def test_nearest_rotation_fixes_perturbed_matrix(rng):
    R = random_rotation(rng)
    M = R + 1e-4 * rng.normal(size=(3, 3))
    Q = nearest_rotation(M)
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-12)
    assert np.abs(Q - R).max() < 1e-3
