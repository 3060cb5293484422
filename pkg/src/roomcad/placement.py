"""Initial metric placement of detected objects and windows.

Objects: the retrieved view's unit-cube projection is registered onto the
detection box, its bottom corners are dropped onto the floor through camera
rays, and the height comes from the vertical edges measured against the
horizon.  Windows: the box is assigned to the wall it overlaps most and the
largest axis-aligned wall rectangle inside its back-projection is kept.
"""

from __future__ import annotations

import warnings

import numpy as np

from .cadlib import view_plane_coords
from .errors import GeometryError, PlacementError
from .geometry import Camera, Plane, Ray, intersect_ray_plane, rotation_z
from .layout import clip_rect, face_polygons, polygon_area
from .scene import LEFT, MIDDLE, RIGHT, WALLS, RoomBox, SceneObject, WindowPlacement

UNIT_CORNERS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], dtype=float
)
YAW_STEP = np.radians(22.5)
ROOM_MARGIN = 0.5


def horizontal_azimuth(d) -> float:
    """Clockwise angle from +y of the horizontal part of ``d`` (radians)."""
    return float(np.arctan2(d[0], d[1]))


def yaw_for_view(azimuth_deg: float, view_dir, snap: bool = True) -> float:
    """World yaw that shows the model to a camera looking along ``view_dir``
    as it appears in the grid view at ``azimuth_deg``."""
    yaw = np.radians(azimuth_deg) - horizontal_azimuth(view_dir)
    if snap:
        yaw = np.round(yaw / YAW_STEP) * YAW_STEP
    return float(yaw % (2 * np.pi))


def register_view(box_uv, corners_uv, bbox) -> np.ndarray:
    """Map view-plane points into the image by the uniform scale and
    translation that carry the silhouette box onto ``bbox``.

    The scale is the geometric mean of the width and height ratios; the
    bottom-center of the silhouette lands on the bottom-center of the box.
    """
    u0, v0, u1, v1 = box_uv
    x0, y0, x1, y1 = bbox
    s = np.sqrt((x1 - x0) / (u1 - u0) * (y1 - y0) / (v1 - v0))
    anchor_uv = np.array([(u0 + u1) / 2, v1])
    anchor_px = np.array([(x0 + x1) / 2, y1])
    return anchor_px + s * (np.asarray(corners_uv, dtype=float) - anchor_uv)


def corners_from_view(bbox, azimuth_deg, elevation_deg, box_uv) -> tuple[np.ndarray, np.ndarray]:
    """Estimated image positions of the bottom and top cube corners, (4, 2) each."""
    uv = view_plane_coords(UNIT_CORNERS, azimuth_deg, elevation_deg)
    px = register_view(box_uv, uv, bbox)
    return px[:4], px[4:]


def ground_points(pixels, camera: Camera) -> np.ndarray:
    ground = Plane.ground()
    dirs = camera.pixel_directions(np.asarray(pixels, dtype=float))
    out = []
    for d in dirs:
        try:
            out.append(intersect_ray_plane(Ray(camera.center, d), ground))
        except GeometryError as exc:
            raise PlacementError("unplaceable", f"corner ray misses the floor ({exc.code})") from exc
    return np.array(out)


def _line_params(bottom, top, camera):
    """1-D coordinates along the image line bottom->top of the top point, the
    horizon crossing and the vertical vanishing point (None if at infinity)."""
    b = np.asarray(bottom, dtype=float)
    t = np.asarray(top, dtype=float)
    seg = t - b
    length = np.linalg.norm(seg)
    u = seg / length
    hz = camera.horizon_line()
    denom = hz[:2] @ u
    if abs(denom) < 1e-12:
        raise PlacementError("degenerate", "vertical edge is parallel to the horizon")
    t_h = -(hz[:2] @ b + hz[2]) / denom
    if abs(hz[:2] @ t + hz[2]) <= 1e-9:
        t_h = length  # the edge ends on the horizon
    vz = camera.vanishing_point([0.0, 0.0, 1.0])
    if abs(vz[2]) <= 1e-9 * np.linalg.norm(vz[:2]):
        t_v = None
    else:
        t_v = (vz[:2] / vz[2] - b) @ u
    return length, t_h, t_v


def vertical_scale(bottom_px, top_px, camera: Camera) -> float:
    """Metric height of a vertical edge standing on the floor.

    The floor (0), the edge top, the horizon (camera height) and the vertical
    vanishing point (infinity) are four collinear image points whose
    cross-ratio fixes the top's height.  With the vertical vanishing point at
    infinity this is the plain ratio ``|top - bottom| / |horizon - bottom|``.
    """
    hz = camera.horizon_line()
    b = np.asarray(bottom_px, dtype=float)
    if hz[:2] @ b + hz[2] >= 0:
        raise PlacementError("above-horizon", f"bottom pixel {b} is not below the horizon")
    if np.allclose(b, top_px, atol=0, rtol=0):
        warnings.warn("vertical edge has zero length; height is 0", stacklevel=2)
        return 0.0
    t_t, t_h, t_v = _line_params(b, top_px, camera)
    if t_v is None:
        ratio = t_t / t_h
    else:
        ratio = t_t * (t_v - t_h) / (t_h * (t_v - t_t))
    return float(camera.height * ratio)


def place_from_corners(bottom_px, camera: Camera, yaw: float, top_px=None):
    """``(position, (sx, sy, sz))`` from image positions of the cube corners.

    ``position`` is the centroid of the four floor intersections; ``sx, sy``
    are the extents of those points along the model axes at ``yaw``; ``sz``
    averages ``vertical_scale`` over the four vertical edges (0 when
    ``top_px`` is not given).
    """
    g = ground_points(bottom_px, camera)
    c = g.mean(axis=0)
    local = (g - c) @ rotation_z(yaw)
    sx = float(np.ptp(local[:, 0]))
    sy = float(np.ptp(local[:, 1]))
    sz = 0.0
    if top_px is not None:
        sz = float(np.mean([vertical_scale(b, t, camera) for b, t in zip(bottom_px, top_px)]))
    return np.array([c[0], c[1], 0.0]), np.array([sx, sy, sz])


def place_object(det, view, camera: Camera, room: RoomBox | None = None, snap_yaw: bool = True) -> SceneObject:
    """Initial 3D placement of a detection given its retrieved grid view."""
    x0, y0, x1, y1 = det.bbox
    anchor = np.array([(x0 + x1) / 2, y1])
    view_dir = camera.pixel_directions(anchor)
    yaw = yaw_for_view(view.azimuth, view_dir, snap=snap_yaw)
    bottom, top = corners_from_view(det.bbox, view.azimuth, view.elevation, view.box)
    pos, scale = place_from_corners(bottom, camera, yaw, top)
    scale = np.clip(scale, 0.05, 5.0)
    if room is not None:
        lo, hi = room.lo - ROOM_MARGIN, room.hi + ROOM_MARGIN
        clamped = np.clip(pos, lo, hi)
        if not np.allclose(clamped, pos):
            warnings.warn(f"{det.category} placed outside the room; clamped", stacklevel=2)
        pos = clamped
    return SceneObject(view.model_id, det.category, pos, scale, yaw)


# ----------------------------------------------------------------------------
# windows


def wall_polygons(camera: Camera, room: RoomBox) -> dict:
    """Image polygon of each visible wall, keyed by wall name."""
    lo, hi = room.lo - camera.center, room.hi - camera.center
    names = {LEFT: "left", MIDDLE: "middle", RIGHT: "right"}
    out = {}
    for label, poly in face_polygons(camera.with_center(np.zeros(3)), lo, hi, include_front=False):
        if label in names:
            out.setdefault(names[label], []).append(poly)
    return out


def bbox_overlap(poly, bbox) -> float:
    x0, y0, x1, y1 = bbox
    shifted = np.asarray(poly) - [x0, y0]
    clipped = clip_rect(shifted, x1 - x0, y1 - y0)
    return polygon_area(clipped) if len(clipped) >= 3 else 0.0


def envelope(poly, xs):
    """Upper and lower boundary of a convex polygon at abscissae ``xs``."""
    p = np.asarray(poly, dtype=float)
    xs = np.asarray(xs, dtype=float)
    top = np.full(xs.shape, -np.inf)
    bot = np.full(xs.shape, np.inf)
    for i in range(len(p)):
        a, b = p[i], p[(i + 1) % len(p)]
        lo_x, hi_x = min(a[0], b[0]), max(a[0], b[0])
        on = (xs >= lo_x - 1e-12) & (xs <= hi_x + 1e-12)
        if not on.any():
            continue
        if hi_x - lo_x < 1e-12:
            ys_hi = np.full(on.sum(), max(a[1], b[1]))
            ys_lo = np.full(on.sum(), min(a[1], b[1]))
        else:
            t = np.clip((xs[on] - a[0]) / (b[0] - a[0]), 0.0, 1.0)
            ys_hi = ys_lo = a[1] + t * (b[1] - a[1])
        top[on] = np.maximum(top[on], ys_hi)
        bot[on] = np.minimum(bot[on], ys_lo)
    return top, bot


def largest_rectangle(poly, tol: float = 1e-4):
    """Largest axis-aligned rectangle ``(x, y, w, h)`` inside a convex polygon.

    For a span ``[x0, x1]`` the tallest fitting rectangle has height
    ``min(top(x0), top(x1)) - max(bot(x0), bot(x1))`` because the upper
    boundary is concave and the lower one convex.  That height is concave in
    ``(x0, x1)``, so the area ``(x1 - x0) * height`` is log-concave and a
    nested pair of bounded 1-D searches reaches the optimum; a coarse grid
    over pairs serves as a fallback.
    """
    from scipy.optimize import minimize_scalar

    p = np.asarray(poly, dtype=float)
    xmin, xmax = p[:, 0].min(), p[:, 0].max()

    def height(x0, x1):
        (t0, t1), (b0, b1) = envelope(p, [x0, x1])
        return min(t0, t1) - max(b0, b1)

    def loss(x0, x1):
        # negative area where a rectangle fits; elsewhere the (positive)
        # shortfall, which keeps the function unimodal
        h = height(x0, x1)
        return -(x1 - x0) * h if h > 0 else -h

    opts = {"xatol": 0.01 * tol}

    def inner(x0):
        r = minimize_scalar(lambda x1: loss(x0, x1), bounds=(x0, xmax), method="bounded", options=opts)
        return r.fun, r.x

    outer = minimize_scalar(lambda x0: inner(x0)[0], bounds=(xmin, xmax), method="bounded", options=opts)
    x0 = float(outer.x)
    fun, x1 = inner(x0)
    area = -fun

    xs = np.unique(np.r_[np.linspace(xmin, xmax, 201), p[:, 0]])
    ta, ba = envelope(p, xs)
    H = np.minimum(ta[:, None], ta[None, :]) - np.maximum(ba[:, None], ba[None, :])
    A = np.where((xs[None, :] > xs[:, None]) & (H > 0), (xs[None, :] - xs[:, None]) * H, 0.0)
    i, j = np.unravel_index(np.argmax(A), A.shape)
    if A[i, j] > area:
        area, x0, x1 = A[i, j], xs[i], xs[j]
    if area <= 0:
        raise PlacementError("empty-rectangle", "polygon has no interior")
    (t0, t1), (b0, b1) = envelope(p, [x0, x1])
    y0, y1 = max(b0, b1), min(t0, t1)
    return float(x0), float(y0), float(x1 - x0), float(y1 - y0)


def _wall_uv(points, room: RoomBox, wall: str) -> np.ndarray:
    origin, u_ax, v_ax, _ = room.wall_frame(wall)
    q = np.asarray(points) - origin
    return np.stack([q @ u_ax, q @ v_ax], axis=-1)


def place_window(det, camera: Camera, room: RoomBox, color=(200, 220, 240)) -> WindowPlacement:
    polys = wall_polygons(camera, room)
    overlaps = {w: sum(bbox_overlap(p, det.bbox) for p in polys.get(w, [])) for w in WALLS}
    wall = max(WALLS, key=lambda w: overlaps[w])  # first wall wins ties
    if overlaps[wall] <= 0:
        raise PlacementError("window-unassigned", f"window box {det.bbox} overlaps no wall")
    # the part of the box on that wall, back-projected onto the wall plane
    x0, y0, x1, y1 = det.bbox
    origin, u_ax, v_ax, _ = room.wall_frame(wall)
    plane = Plane(np.cross(u_ax, v_ax), float(np.cross(u_ax, v_ax) @ origin))
    best = max(polys[wall], key=lambda p: bbox_overlap(p, det.bbox))
    piece = np.array(clip_rect(np.asarray(best) - [x0, y0], x1 - x0, y1 - y0)) + [x0, y0]
    dirs = camera.pixel_directions(piece)
    pts = [intersect_ray_plane(Ray(camera.center, d), plane) for d in dirs]
    uv = _wall_uv(pts, room, wall)
    rect = largest_rectangle(uv)
    return WindowPlacement(wall, rect, color)
