import numpy as np
import pytest

from helpers import manhattan_angle, manhattan_camera, manhattan_segments, true_vanishing_points
from roomcad.errors import CalibrationError
from roomcad.geometry import Camera, look_rotation
from roomcad.vanishing import (
    LineSegment,
    VanishingError,
    VanishingTriple,
    calibrate,
    consistency_angles,
    estimate_vanishing_points,
    extract_segments,
    orthocenter,
    orthogonality_error_deg,
)


def test_rectangle_gives_four_axis_aligned_segments():
    img = np.zeros((240, 320))
    img[60:180, 80:240] = 255
    segs = extract_segments(img)
    assert len(segs) == 4
    orients = sorted(s.orientation_deg for s in segs)
    for got, want in zip(orients, [0, 0, 90, 90]):
        assert min(abs(got - want), 180 - abs(got - want)) < 1.0
    # the fitted lines sit on the rectangle edges
    xs = sorted(s.midpoint[0] for s in segs if abs(s.orientation_deg - 90) < 1)
    ys = sorted(s.midpoint[1] for s in segs if abs(s.orientation_deg - 90) >= 1)
    assert abs(xs[0] - 80) < 0.5 and abs(xs[1] - 240) < 0.5
    assert abs(ys[0] - 60) < 0.5 and abs(ys[1] - 180) < 0.5


def test_constant_image_has_no_segments():
    assert extract_segments(np.full((64, 64), 7.0)) == []


def test_vertical_step_edge():
    img = np.zeros((80, 100))
    img[:, 50:] = 200
    segs = extract_segments(img)
    assert segs
    for s in segs:
        assert abs(s.orientation_deg - 90) <= 1.0


def test_segments_sorted_by_strength():
    img = np.zeros((120, 160))
    img[30:90, 40:120] = 255
    img[10:20, 10:150] = 90
    strengths = [s.strength for s in extract_segments(img)]
    assert strengths == sorted(strengths, reverse=True)


def test_small_image_rejected():
    with pytest.raises(VanishingError) as e:
        extract_segments(np.zeros((20, 100)))
    assert e.value.code == "image-too-small"


def test_parallel_families_and_pencil():
    segs = []
    for k in range(5):
        y = 40 + 60 * k
        segs.append(LineSegment(np.array([50.0, y]), np.array([300.0, y]), 10.0))
        x = 60 + 70 * k
        segs.append(LineSegment(np.array([x, 30.0]), np.array([x, 200.0]), 10.0))
    # pencil converging at (320, 240) (image center)
    for ang in np.radians([20, 65, 110, 155, 200, 245]):
        d = np.array([np.cos(ang), np.sin(ang)])
        segs.append(LineSegment(np.array([320, 240]) + 60 * d, np.array([320, 240]) + 200 * d, 10.0))
    t = estimate_vanishing_points(segs, (640, 480))
    pts = [p / np.linalg.norm(p) for p in t.points]
    inf = [p for p in pts if abs(p[2]) < 1e-9]
    fin = [p for p in pts if abs(p[2]) >= 1e-9]
    assert len(inf) == 2 and len(fin) == 1
    assert np.allclose(fin[0][:2] / fin[0][2], [320, 240], atol=1e-6)
    dirs = sorted(tuple(np.round(np.abs(p[:2]), 6)) for p in inf)
    assert dirs == [(0.0, 1.0), (1.0, 0.0)]


def test_wireframe_box_vps_within_two_pixels(rng):
    cam = Camera(500.0, (320, 240), look_rotation(0.6, -0.3), np.zeros(3), (640, 480))
    segs = manhattan_segments(cam, rng, per_axis=10)
    t = estimate_vanishing_points(segs, cam.image_size)
    truth = true_vanishing_points(cam)
    for v in t.points:
        v = v[:2] / v[2]
        d = min(np.linalg.norm(v - tv[:2] / tv[2]) for tv in truth)
        assert d < 2.0


def test_inliers_within_three_degrees(rng):
    cam = manhattan_camera(rng)
    segs = manhattan_segments(cam, rng, noise=0.3)
    t = estimate_vanishing_points(segs, cam.image_size)
    mids = np.array([s.midpoint for s in segs])
    dirs = np.array([s.direction for s in segs])
    seen = set()
    for k, idx in enumerate(t.inliers):
        if len(idx):
            ang = consistency_angles(np.array([t.points[k]]), mids[idx], dirs[idx])[:, 0]
            assert ang.max() <= 3.0
        assert not seen & set(idx.tolist())
        seen |= set(idx.tolist())


def test_permuting_segments_gives_same_triple(rng):
    cam = manhattan_camera(rng)
    segs = manhattan_segments(cam, rng, noise=0.3)
    a = estimate_vanishing_points(segs, cam.image_size)
    perm = [segs[i] for i in rng.permutation(len(segs))]
    b = estimate_vanishing_points(perm, cam.image_size)
    for u, v in zip(a.points, b.points):
        assert np.array_equal(u, v)


def test_strength_scaling_invariance(rng):
    cam = manhattan_camera(rng)
    segs = manhattan_segments(cam, rng, noise=0.3)
    a = estimate_vanishing_points(segs, cam.image_size)
    scaled = [LineSegment(s.p1, s.p2, 7.5 * s.strength) for s in segs]
    b = estimate_vanishing_points(scaled, cam.image_size)
    for u, v in zip(a.points, b.points):
        assert np.allclose(u, v, atol=1e-12)


def test_single_orientation_is_insufficient():
    segs = [LineSegment(np.array([10.0, y]), np.array([200.0, y]), 5.0) for y in range(10, 200, 20)]
    with pytest.raises(VanishingError) as e:
        estimate_vanishing_points(segs, (640, 480))
    assert e.value.code == "insufficient-structure"


def test_calibration_symmetric_case():
    f = 500.0
    c = np.array([320.0, 240.0])
    # horizontal VPs on the image x axis at +-f, vertical VP at infinity
    vx = np.r_[c + [f, 0], 1]
    vy = np.r_[c + [-f, 0], 1]
    vz = np.array([0.0, 1.0, 0.0])
    cam = calibrate(VanishingTriple(vx, vy, vz), (640, 480))
    assert np.allclose(cam.principal_point, c)
    assert np.isclose(cam.focal, f, rtol=1e-12)


def test_calibration_orthogonality_constraints(rng):
    for _ in range(20):
        truth = manhattan_camera(rng)
        vps = true_vanishing_points(truth)
        cam = calibrate(VanishingTriple(*vps), truth.image_size)
        xy = [v[:2] / v[2] for v in vps]
        for i, j in ((0, 1), (0, 2), (1, 2)):
            val = (xy[i] - cam.principal_point) @ (xy[j] - cam.principal_point) + cam.focal**2
            assert abs(val) <= 0.01 * cam.focal**2
        assert orthogonality_error_deg(vps, cam) < 2.0
        # floor normal points up in the image, depth axis into the scene
        assert cam.rotation[1, 2] < 0
        assert cam.rotation[2, 1] > 0


def test_calibration_with_one_vp_at_infinity():
    # yaw 0: the world x axis is parallel to the image plane
    truth = Camera(450.0, (320, 240), look_rotation(0.0, -0.35), np.zeros(3), (640, 480))
    vps = true_vanishing_points(truth)
    assert abs(vps[0][2]) < 1e-9
    cam = calibrate(VanishingTriple(*vps), truth.image_size)
    assert np.isclose(cam.focal, 450.0, rtol=1e-9)
    R = cam.rotation
    assert np.allclose(R[:, 0], np.cross(R[:, 1], R[:, 2]), atol=1e-9)
    assert manhattan_angle(truth.rotation, R) < 1e-6


def test_all_at_infinity_is_degenerate():
    vs = [np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([1.0, 1.0, 0])]
    with pytest.raises(CalibrationError) as e:
        calibrate(VanishingTriple(*vs), (640, 480))
    assert e.value.code == "degenerate-calibration"


def test_orthocenter_of_right_triangle():
    # the orthocenter of a right triangle is the right-angle vertex
    assert np.allclose(orthocenter([0, 0], [4, 0], [0, 3]), [0, 0])


def test_forward_model_closure_on_noisy_segments(rng):
    ok = 0
    for _ in range(30):
        cam = manhattan_camera(rng)
        segs = manhattan_segments(cam, rng, noise=0.2)
        try:
            est = calibrate(estimate_vanishing_points(segs, cam.image_size), cam.image_size)
        except (VanishingError, CalibrationError):
            continue
        if abs(est.focal / cam.focal - 1) < 0.02 and np.degrees(manhattan_angle(cam.rotation, est.rotation)) < 1.0:
            ok += 1
    assert ok >= 27
