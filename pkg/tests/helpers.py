"""Shared synthetic generators for the test-suite."""

import numpy as np

from roomcad.geometry import Camera, rotation_angle_between, rotation_z
from roomcad.detections import Detection
from roomcad.vanishing import LineSegment, VanishingTriple


def manhattan_camera(rng, size=(640, 480), focal=None):
    """A camera at eye height looking into a Manhattan world from a random
    heading, with moderate pitch and a little roll."""
    from roomcad.geometry import look_rotation

    yaw = rng.uniform(0.25, 1.3) * rng.choice([-1, 1])
    pitch = rng.uniform(-0.45, -0.1)
    roll = rng.uniform(-0.08, 0.08)
    f = focal if focal is not None else rng.uniform(0.6, 1.4) * size[0]
    pp = 0.5 * np.asarray(size, dtype=float)
    return Camera(f, pp, look_rotation(yaw, pitch, roll), np.zeros(3), size)


def manhattan_segments(camera, rng, per_axis=12, noise=0.0):
    """Image segments of random 3D lines along the three world axes."""
    w, h = camera.image_size
    segs = []
    for axis in range(3):
        made = 0
        tries = 0
        while made < per_axis and tries < 2000:
            tries += 1
            d_cam = np.array([rng.uniform(-1, 1) * w / (2 * camera.focal), rng.uniform(-1, 1) * h / (2 * camera.focal), 1.0])
            p0 = camera.center + camera.rotation.T @ (d_cam * rng.uniform(2, 8))
            e = np.eye(3)[axis] * rng.uniform(0.5, 2.0)
            a, b = p0 - 0.5 * e, p0 + 0.5 * e
            (pa, pb), (za, zb) = camera.project_many(np.array([a, b]))
            if za <= 0.1 or zb <= 0.1:
                continue
            if not all(0 <= p[0] <= w and 0 <= p[1] <= h for p in (pa, pb)):
                continue
            if np.linalg.norm(pb - pa) < 0.05 * max(w, h):
                continue
            if noise:
                pa = pa + rng.normal(0, noise, 2)
                pb = pb + rng.normal(0, noise, 2)
            segs.append(LineSegment(pa, pb, float(np.linalg.norm(pb - pa))))
            made += 1
    return segs


def manhattan_angle(R_true, R_est):
    """Rotation distance (radians) modulo relabelling the horizontal axes,
    which a Manhattan scene cannot distinguish."""
    return min(rotation_angle_between(R_true @ rotation_z(k * np.pi / 2), R_est) for k in range(4))


def true_vanishing_points(camera):
    return [camera.vanishing_point(e) for e in np.eye(3)]


def placement_case(rng):
    """A random camera at 1.2-1.8 m and a random box on the floor in front
    of it.  Returns (camera, object, bottom corner pixels, top corner pixels)."""
    from roomcad.scene import SceneObject

    cam = manhattan_camera(rng)
    cam = cam.with_center([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.2, 1.8)])
    fwd = cam.optical_axis.copy()
    fwd[2] = 0.0
    fwd /= np.linalg.norm(fwd)
    side = np.array([-fwd[1], fwd[0], 0.0])
    while True:
        pos = cam.center + fwd * rng.uniform(2.5, 5.0) + side * rng.uniform(-0.8, 0.8)
        pos[2] = 0.0
        obj = SceneObject("box", "chest", pos, rng.uniform([0.3, 0.3, 0.3], [1.5, 1.5, 1.2]), rng.uniform(0, 2 * np.pi))
        px, depth = cam.project_many(obj.box_corners())
        if np.all(depth > 0.5):
            return cam, obj, px[:4], px[4:]


def fine_grid_iou(pred_pred, truth_pred, camera, step=0.01, near=0.5, far=5.5):
    """IoU of two occupancy predicates sampled on a fine grid of points
    inside the camera frustum and the [near, far] distance band.

    The grid is enumerated slab by slab over the frustum's bounding box.
    """
    w, h = camera.image_size
    corners = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=float)
    rays = camera.pixel_directions(corners)
    pts = np.vstack([camera.center, camera.center + far * rays, camera.center + far * camera.optical_axis])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    xs = np.arange(lo[0], hi[0] + step, step)
    ys = np.arange(lo[1], hi[1] + step, step)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    inter = union = 0
    for z in np.arange(lo[2], hi[2] + step, step):
        p = np.stack([gx, gy, np.full_like(gx, z)], axis=1)
        r = np.linalg.norm(p - camera.center, axis=1)
        p = p[(r >= near) & (r <= far)]
        px, depth = camera.project_many(p)
        ok = (depth > 0) & (px[:, 0] >= 0) & (px[:, 0] <= w) & (px[:, 1] >= 0) & (px[:, 1] <= h)
        p = p[ok]
        a, b = pred_pred(p), truth_pred(p)
        inter += np.count_nonzero(a & b)
        union += np.count_nonzero(a | b)
    return inter / union if union else 1.0


def box_predicate(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return lambda p: np.all((p >= lo) & (p <= hi), axis=1)


def oriented_box_predicate(center_xy, size, yaw, z0=0.0):
    """Inside test for a yawed box written out with explicit trigonometry."""
    c, s = np.cos(yaw), np.sin(yaw)

    def inside(p):
        dx, dy = p[:, 0] - center_xy[0], p[:, 1] - center_xy[1]
        u = c * dx + s * dy
        v = -s * dx + c * dy
        return (np.abs(u) <= size[0] / 2) & (np.abs(v) <= size[1] / 2) & (p[:, 2] >= z0) & (p[:, 2] <= z0 + size[2])

    return inside


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_camera(rng):
    return Camera(
        rng.uniform(200, 1200),
        rng.uniform([100, 100], [500, 400]),
        random_rotation(rng),
        rng.uniform(-3, 3, 3),
        (640, 480),
    )


def brute_force_nms(dets, t):
    """Textbook O(n^2) greedy suppression, written independently."""
    out = []
    for cat in sorted({d.category for d in dets}):
        pool = [d for d in dets if d.category == cat]
        while pool:
            best = pool[0]
            for d in pool[1:]:
                if d.score > best.score or (d.score == best.score and d.bbox < best.bbox):
                    best = d
            out.append(best)
            pool = [d for d in pool if d is not best and box_iou(d.bbox, best.bbox) <= t]
    return out


def box_iou(a, b):
    inter_w = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    inter_h = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = inter_w * inter_h
    return inter / ((a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter)


def random_dets(rng, n, cats=("chair", "table")):
    out = []
    for _ in range(n):
        x, y = rng.uniform(0, 200, 2)
        w, h = rng.uniform(10, 80, 2)
        out.append(Detection(rng.choice(cats), (x, y, x + w, y + h), round(rng.uniform(0, 1), 2)))
    return out


def room_edge_triple(room, camera, n=24):
    """VPs of ``camera`` plus segments along the visible back-room edges:
    the two back vertical corners and the back floor and ceiling lines."""
    lo, hi = room.lo, room.hi
    edges_z = [([lo[0], hi[1], z0], [lo[0], hi[1], z1]) for z0, z1 in [(0.05, hi[2] - 0.05)]]
    edges_z += [([hi[0], hi[1], 0.05], [hi[0], hi[1], hi[2] - 0.05])]
    edges_x = [([lo[0] + 0.05, hi[1], 0.0], [hi[0] - 0.05, hi[1], 0.0])]
    edges_x += [([lo[0] + 0.05, hi[1], hi[2]], [hi[0] - 0.05, hi[1], hi[2]])]
    segs, inl = [], ([], [], [])
    for axis, edges in ((2, edges_z), (0, edges_x)):
        for a, b in edges:
            (pa, pb), _ = camera.project_many(np.array([a, b], dtype=float))
            inl[axis].append(len(segs))
            segs.append(LineSegment(pa, pb, float(np.linalg.norm(pb - pa))))
    vps = true_vanishing_points(camera)
    return VanishingTriple(*vps, tuple(np.array(i, dtype=int) for i in inl), segs)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def report(number, title, ok, detail):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
