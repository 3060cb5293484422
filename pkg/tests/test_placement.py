import warnings

import numpy as np
import pytest
from helpers import manhattan_camera, placement_case

from roomcad.cadlib import view_plane_coords
from roomcad.detections import Detection
from roomcad.errors import PlacementError
from roomcad.geometry import Camera, look_rotation
from roomcad.placement import (
    corners_from_view,
    largest_rectangle,
    place_from_corners,
    place_window,
    register_view,
    vertical_scale,
    wall_polygons,
    yaw_for_view,
)
from roomcad.scene import RoomBox, WindowPlacement


def test_round_trip_from_exact_corners(rng):
    for _ in range(50):
        cam, obj, bottom, top = placement_case(rng)
        pos, scale = place_from_corners(bottom, cam, obj.yaw, top)
        assert np.abs(pos - obj.position).max() < 1e-3
        assert np.abs(scale - obj.scale).max() < 1e-3


def horizon_point_above(cam, bottom):
    """Where the image of the vertical line through ``bottom`` meets the horizon."""
    hz = cam.horizon_line()
    vz = cam.vanishing_point([0, 0, 1])
    line = np.cross(np.r_[bottom, 1.0], vz)
    p = np.cross(line, hz)
    return p[:2] / p[2]


def test_vertical_scale_boundary_is_camera_height(rng):
    for _ in range(10):
        cam, obj, bottom, _ = placement_case(rng)
        for b in bottom:
            top = horizon_point_above(cam, b)
            assert vertical_scale(b, top, cam) == cam.height


def test_vertical_scale_level_camera():
    cam = Camera(500.0, (320, 240), look_rotation(0.0, 0.0), (0, 0, 1.5))
    # vertical vanishing point at infinity: plain ratio
    assert vertical_scale((320, 400), (320, 240), cam) == 1.5
    assert vertical_scale((320, 400), (320, 320), cam) == pytest.approx(0.75, abs=1e-12)


def test_vertical_scale_zero_length_warns():
    cam = Camera(500.0, (320, 240), look_rotation(0.0, -0.2), (0, 0, 1.5))
    with pytest.warns(UserWarning):
        assert vertical_scale((300, 400), (300, 400), cam) == 0.0


def test_bottom_above_horizon_rejected():
    cam = Camera(500.0, (320, 240), look_rotation(0.0, 0.0), (0, 0, 1.5))
    with pytest.raises(PlacementError) as e:
        vertical_scale((320, 100), (320, 50), cam)
    assert e.value.code == "above-horizon"


def test_vertical_scale_monotone(rng):
    cam, obj, bottom, top = placement_case(rng)
    b, t = bottom[0], top[0]
    heights = [vertical_scale(b, b + s * (t - b), cam) for s in np.linspace(0.1, 1.5, 15)]
    assert np.all(np.diff(heights) > 0)
    assert heights[9] == pytest.approx(obj.scale[2], abs=1e-9)


def test_register_view_maps_box_onto_bbox():
    box = (-0.3, -0.6, 0.5, 0.4)
    corners = [(box[0], box[1]), (box[2], box[3]), (0.1, box[3])]
    out = register_view(box, corners, (10, 20, 110, 145))
    assert np.allclose(out[1][1], 145) and np.allclose(out[2], [60, 145])
    # uniform scale: geometric mean of the two ratios
    s = np.sqrt(100 / 0.8 * 125 / 1.0)
    assert np.allclose(out[1] - out[0], s * np.array([0.8, 1.0]))


def test_yaw_snaps_to_grid():
    yaw = yaw_for_view(45.0, [0.3, 1.0, -0.2])
    assert (yaw / np.radians(22.5)) == pytest.approx(round(yaw / np.radians(22.5)), abs=1e-12)
    assert yaw_for_view(90.0, [0.0, 1.0, 0.0]) == pytest.approx(np.pi / 2)


def test_corners_from_view_consistent():
    uv = view_plane_coords(np.array([[0.5, 0.5, 0.0]]), 30.0, 15.0)
    box = (-0.7, -0.9, 0.7, 0.5)
    b, t = corners_from_view((0, 0, 140, 140), 30.0, 15.0, box)
    assert b.shape == t.shape == (4, 2)
    assert np.all(t[:, 1] < b[:, 1])  # tops above bottoms in the image
    assert uv.shape == (1, 2)


# ---------------------------------------------------------------------------
# windows


ROOM = RoomBox([0, 0, 0], 4.0, 5.0, 2.6)


def window_box(cam, room, win):
    px, _ = cam.project_many(win.corners(room))
    return (px[:, 0].min(), px[:, 1].min(), px[:, 0].max(), px[:, 1].max())


def test_fronto_parallel_window_exact():
    cam = Camera(400.0, (320, 240), look_rotation(0.0, 0.0), (2.0, 0.5, 1.5))
    truth = WindowPlacement("middle", (1.2, 0.9, 1.3, 1.0))
    det = Detection("window", window_box(cam, ROOM, truth), 1.0)
    got = place_window(det, cam, ROOM)
    assert got.wall == "middle"
    assert np.allclose(got.rect, truth.rect, atol=1e-3)


def test_window_rect_lies_inside_its_wall(rng):
    for _ in range(10):
        cam = manhattan_camera(rng, size=(320, 240)).with_center([2.0, 0.6, 1.5])
        x0, y0 = rng.uniform(0, 200), rng.uniform(0, 140)
        det = Detection("window", (x0, y0, x0 + rng.uniform(20, 100), y0 + rng.uniform(20, 80)), 1.0)
        try:
            w = place_window(det, cam, ROOM)
        except PlacementError:
            continue
        length = ROOM.wall_frame(w.wall)[3]
        u, v, ww, hh = w.rect
        assert -1e-6 <= u and u + ww <= length + 1e-6
        assert -1e-6 <= v and v + hh <= ROOM.height + 1e-6
        assert ww > 0 and hh > 0


def test_window_assigned_by_majority_overlap():
    cam = Camera(300.0, (320, 240), look_rotation(0.35, 0.0), (1.0, 1.0, 1.5))
    polys = wall_polygons(cam, ROOM)
    # the middle/right corner seam in the image
    seam = max(p[:, 0].max() for p in polys["middle"])
    for frac_middle, want in ((0.7, "middle"), (0.3, "right")):
        width = 60.0
        x0 = seam - frac_middle * width
        det = Detection("window", (x0, 200, x0 + width, 240), 1.0)
        assert place_window(det, cam, ROOM).wall == want


def test_window_outside_walls_rejected():
    cam = Camera(300.0, (320, 240), look_rotation(0.0, -0.9), (2.0, 2.5, 1.5))
    det = Detection("window", (150, 200, 170, 220), 1.0)  # floor only
    with pytest.raises(PlacementError) as e:
        place_window(det, cam, ROOM)
    assert e.value.code == "window-unassigned"


def halfplane_span(poly, x):
    """Vertical extent of a convex polygon at abscissa x, from its edge half-planes."""
    p = np.asarray(poly)
    lo, hi = -np.inf, np.inf
    e1, e2 = p[1] - p[0], p[2] - p[1]
    sign = np.sign(e1[0] * e2[1] - e1[1] * e2[0])
    for a, b in zip(p, np.roll(p, -1, axis=0)):
        d = b - a
        # inside: sign * cross(d, q - a) >= 0, linear in y at fixed x
        cy = sign * d[0]
        c0 = sign * (d[0] * (-a[1]) - d[1] * (x - a[0]))
        if abs(cy) < 1e-15:
            if c0 < 0:
                return np.nan, np.nan
        elif cy > 0:
            lo = max(lo, -c0 / cy)
        else:
            hi = min(hi, -c0 / cy)
    return lo, hi


def test_largest_rectangle_against_grid_search(rng):
    for _ in range(8):
        ang = np.sort(rng.uniform(0, 2 * np.pi, 6))
        poly = np.c_[np.cos(ang) * rng.uniform(0.8, 1.2), np.sin(ang) * rng.uniform(0.4, 0.6)]
        from scipy.spatial import ConvexHull

        poly = poly[ConvexHull(poly).vertices]
        x, y, w, h = largest_rectangle(poly)
        xs = np.arange(poly[:, 0].min(), poly[:, 0].max(), 1e-3)
        spans = np.array([halfplane_span(poly, v) for v in xs])
        lo, hi = spans[:, 0], spans[:, 1]
        H = np.minimum(hi[:, None], hi[None, :]) - np.maximum(lo[:, None], lo[None, :])
        A = np.where((xs[None, :] > xs[:, None]) & (H > 0), (xs[None, :] - xs[:, None]) * H, 0.0)
        best = np.nanmax(A)
        assert w * h >= best - 1e-9
        assert w * h <= best * 1.01
        for cx, cy in ((x, y), (x + w, y), (x, y + h), (x + w, y + h)):
            l, u = halfplane_span(poly, cx)
            assert l - 1e-9 <= cy <= u + 1e-9
