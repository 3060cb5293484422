"""Cuboid room-layout hypotheses, ranking against surface-label maps, and the
2D pixel error metric.

A hypothesis is fixed by four planes through the camera center:

* two vertical planes (image rays through the vertical vanishing point) that
  contain the left and right vertical edges of the back wall, given by their
  azimuths about world z (0 = straight along +y, positive toward +x);
* two planes containing the x direction (image rays through ``vp_x``) that
  contain the floor and ceiling edges of the back wall, given by their
  elevations (negative = below the camera).

With the camera one unit above the floor this pins down a box up to scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import LayoutError
from .geometry import Camera
from .scene import CEILING, FLOOR, LEFT, MIDDLE, RIGHT, RoomBox

NUM_CLASSES = 5
_BEYOND_MARGIN = np.radians(2.0)
_MAX_ANGLE = np.radians(89.5)


@dataclass
class LabelMap:
    """Per-pixel probabilities over (ceiling, floor, left, middle, right)."""

    probabilities: np.ndarray  # (H, W, 5)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 3 or p.shape[2] != NUM_CLASSES:
            raise LayoutError("bad-labelmap", f"expected (H, W, 5), got {p.shape}")
        if np.any(p < -1e-6) or np.any(p > 1 + 1e-6):
            raise LayoutError("bad-labelmap", "probabilities outside [0, 1]")
        if not np.allclose(p.sum(axis=2), 1.0, atol=1e-4):
            raise LayoutError("bad-labelmap", "per-pixel probabilities do not sum to 1")
        self.probabilities = p

    @property
    def width(self) -> int:
        return self.probabilities.shape[1]

    @property
    def height(self) -> int:
        return self.probabilities.shape[0]

    @classmethod
    def one_hot(cls, labels) -> "LabelMap":
        labels = np.asarray(labels, dtype=int)
        return cls(np.eye(NUM_CLASSES)[labels])

    def argmax(self) -> np.ndarray:
        return np.argmax(self.probabilities, axis=2)


class PixelRays:
    """Per-pixel ray directions of a camera, with reciprocals for fast
    box-exit tests.  Shared by all hypotheses built on one camera."""

    _BIG = np.float32(1e30)

    def __init__(self, camera: Camera | None, directions=None):
        d = camera.pixel_grid_directions() if directions is None else np.asarray(directions, dtype=float)
        self.shape = d.shape[:-1]
        safe = np.where(d != 0, d, 1.0)
        inv = np.where(d != 0, 1.0 / safe, 0.0)
        # reciprocals split by sign so exit distances need no branching
        self._pos = [np.ascontiguousarray(np.where(d[..., k] > 0, inv[..., k], 0.0), dtype=np.float32) for k in range(3)]
        self._neg = [np.ascontiguousarray(np.where(d[..., k] < 0, inv[..., k], 0.0), dtype=np.float32) for k in range(3)]
        self._none = [np.where(d[..., k] == 0, self._BIG, np.float32(0)).astype(np.float32) for k in range(3)]
        self.side = np.where(d[..., 0] < 0, LEFT, RIGHT).astype(np.int8)
        self.face_y = np.where(d[..., 1] > 0, MIDDLE, self.side).astype(np.int8)
        self.face_z = np.where(d[..., 2] > 0, CEILING, FLOOR).astype(np.int8)

    def exit_labels(self, lo, hi) -> np.ndarray:
        t = [
            self._pos[k] * np.float32(hi[k]) + self._neg[k] * np.float32(lo[k]) + self._none[k]
            for k in range(3)
        ]
        use_x = (t[0] <= t[1]) & (t[0] <= t[2])
        use_y = t[1] <= t[2]
        return np.where(use_x, self.side, np.where(use_y, self.face_y, self.face_z))


def box_exit_labels(directions, lo, hi) -> np.ndarray:
    """Surface class of the face each ray leaves the box through.

    ``directions`` are world-frame ray directions (..., 3) from a camera at the
    origin of a frame where the box spans ``lo``..``hi`` (the camera must be
    inside).  Rays leaving through the wall behind the camera are labelled as
    the left or right wall by their x direction.
    """
    return PixelRays(None, directions).exit_labels(lo, hi)


def room_labels(room: RoomBox, camera: Camera) -> np.ndarray:
    """Per-pixel surface labels of a metric room seen by ``camera``."""
    dirs = camera.pixel_grid_directions()
    return box_exit_labels(dirs, room.lo - camera.center, room.hi - camera.center)


@dataclass(frozen=True)
class LayoutHypothesis:
    camera: Camera
    left_azimuth: float
    right_azimuth: float
    floor_elevation: float
    ceiling_elevation: float
    front_margin: float = 0.5
    pixel_rays: PixelRays | None = field(default=None, compare=False, repr=False)

    @property
    def rays(self):
        return (self.left_azimuth, self.right_azimuth, self.floor_elevation, self.ceiling_elevation)

    def unit_bounds(self):
        """Box bounds relative to the camera for a camera height of 1."""
        d = 1.0 / np.tan(-self.floor_elevation)
        lo = np.array([d * np.tan(self.left_azimuth), -self.front_margin, -1.0])
        hi = np.array([d * np.tan(self.right_azimuth), d, d * np.tan(self.ceiling_elevation)])
        return lo, hi

    @cached_property
    def labels(self) -> np.ndarray:
        lo, hi = self.unit_bounds()
        rays = self.pixel_rays if self.pixel_rays is not None else PixelRays(self.camera)
        return rays.exit_labels(lo, hi)

    def polygons(self) -> list:
        """Image-space face polygons as ``(label, (n, 2) array)`` pairs.

        Faces are clipped to the camera's near plane and the image rectangle.
        """
        lo, hi = self.unit_bounds()
        return face_polygons(self.camera, lo, hi)


def _box_faces(lo, hi):
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    return [
        (CEILING, [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)]),
        (FLOOR, [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)]),
        (LEFT, [(x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)]),
        (MIDDLE, [(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)]),
        (RIGHT, [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)]),
        (None, [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)]),
    ]


def _clip_polygon(poly, inside, intersect):
    out = []
    n = len(poly)
    for i in range(n):
        cur, prev = poly[i], poly[i - 1]
        cin, pin = inside(cur), inside(prev)
        if cin:
            if not pin:
                out.append(intersect(prev, cur))
            out.append(cur)
        elif pin:
            out.append(intersect(prev, cur))
    return out


def clip_near(points_cam, near=1e-6):
    def inside(p):
        return p[2] >= near

    def intersect(p, q):
        t = (near - p[2]) / (q[2] - p[2])
        return p + t * (q - p)

    return _clip_polygon([np.asarray(p, dtype=float) for p in points_cam], inside, intersect)


def clip_rect(poly2d, w, h):
    poly = [np.asarray(p, dtype=float) for p in poly2d]
    for axis, bound, keep_ge in ((0, 0.0, True), (0, float(w), False), (1, 0.0, True), (1, float(h), False)):
        if not poly:
            break

        def inside(p, axis=axis, bound=bound, keep_ge=keep_ge):
            return p[axis] >= bound if keep_ge else p[axis] <= bound

        def intersect(p, q, axis=axis, bound=bound):
            t = (bound - p[axis]) / (q[axis] - p[axis])
            return p + t * (q - p)

        poly = _clip_polygon(poly, inside, intersect)
    return poly


def face_polygons(camera: Camera, lo, hi, include_front: bool = True) -> list:
    out = []
    w, h = camera.image_size
    for label, quad in _box_faces(lo, hi):
        if label is None and not include_front:
            continue
        pc = np.asarray(quad) @ camera.rotation.T
        clipped = clip_near(pc)
        if len(clipped) < 3:
            continue
        pc = np.array(clipped)
        px = camera.focal * pc[:, :2] / pc[:, 2:3] + camera.principal_point
        poly = clip_rect(px, w, h)
        if len(poly) < 3:
            continue
        poly = np.array(poly)
        if label is None:
            label = LEFT if poly[:, 0].mean() < camera.principal_point[0] else RIGHT
        out.append((label, poly))
    return out


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


# ----------------------------------------------------------------------------
# hypothesis generation


def nested_grid(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` points in [lo, hi]: both ends, then binary subdivision.

    The grid for ``n`` is always a subset of the grid for ``n + 1``; it is
    uniform whenever ``count - 1`` is a power of two.
    """
    if count <= 0:
        return np.zeros(0)
    fr = [0.0, 1.0]
    denom = 2
    while len(fr) < count:
        for k in range(1, denom, 2):
            fr.append(k / denom)
            if len(fr) >= count:
                break
        denom *= 2
    fr = np.array(fr[:count])
    if hi == lo:
        return np.array([lo])
    return np.unique(lo + (hi - lo) * fr)


def _image_border_directions(camera: Camera, n=64):
    w, h = camera.image_size
    t = np.linspace(0.0, 1.0, n)
    border = np.concatenate(
        [
            np.c_[t * w, np.zeros(n)],
            np.c_[t * w, np.full(n, h)],
            np.c_[np.zeros(n), t * h],
            np.c_[np.full(n, w), t * h],
        ]
    )
    return camera.pixel_directions(border)


def azimuth(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return np.arctan2(d[..., 0], d[..., 1])


def elevation_about_x(d) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    return np.arctan2(d[..., 2], d[..., 1])


def _segment_angles(camera, segments, fn):
    if not segments:
        return np.zeros(0)
    mids = np.array([0.5 * (s.p1 + s.p2) for s in segments])
    return fn(camera.pixel_directions(mids))


def ray_candidates(camera: Camera, triple, counts: int = 10):
    """Candidate (left, right, floor, ceiling) angles for hypothesis generation."""
    if counts < 2:
        raise LayoutError("bad-counts", "need at least 2 rays per vanishing point")
    border = _image_border_directions(camera)
    b_az = azimuth(border)
    b_el = elevation_about_x(border)

    az = _segment_angles(camera, triple.inlier_segments(2), azimuth)
    el = _segment_angles(camera, triple.inlier_segments(0), elevation_about_x)
    az = az[np.abs(az) < _MAX_ANGLE]
    el = el[np.abs(el) < _MAX_ANGLE]
    az_grid = nested_grid(az.min(), az.max(), counts) if len(az) else np.zeros(0)
    el_grid = nested_grid(el.min(), el.max(), counts) if len(el) else np.zeros(0)

    beyond_left = max(min(b_az.min(), 0.0) - _BEYOND_MARGIN, -_MAX_ANGLE)
    beyond_right = min(max(b_az.max(), 0.0) + _BEYOND_MARGIN, _MAX_ANGLE)
    left = sorted(set(az_grid[az_grid < 0].tolist()) | {beyond_left})
    right = sorted(set(az_grid[az_grid > 0].tolist()) | {beyond_right})
    floor = el_grid[el_grid < 0].tolist()
    ceiling = el_grid[el_grid > 0].tolist()
    if not floor:
        floor = [max(min(b_el.min(), 0.0) - _BEYOND_MARGIN, -_MAX_ANGLE)]
    if not ceiling:
        ceiling = [min(max(b_el.max(), 0.0) + _BEYOND_MARGIN, _MAX_ANGLE)]
    return left, right, sorted(floor), sorted(ceiling)


def generate_hypotheses(camera: Camera, triple, counts: int = 10) -> list:
    """Enumerate every feasible box from the sampled junction rays.

    ``triple`` supplies the inlier segments that bound the sampling range:
    vertical-VP inliers for the wall edges and ``vp_x`` inliers for the
    floor/ceiling edges.  A wall edge may also lie outside the image (the
    corner is not visible), and a side with no sampled ray gets one ray just
    beyond the image border.
    """
    left, right, floor, ceiling = ray_candidates(camera, triple, counts)
    rays = PixelRays(camera)
    hyps = []
    for l_az, r_az, f_el, c_el in itertools.product(left, right, floor, ceiling):
        if not (-_MAX_ANGLE <= l_az < 0 < r_az <= _MAX_ANGLE):
            continue
        if not (-_MAX_ANGLE <= f_el < 0 < c_el <= _MAX_ANGLE):
            continue
        hyps.append(LayoutHypothesis(camera, l_az, r_az, f_el, c_el, pixel_rays=rays))
    if not hyps:
        raise LayoutError("no-hypothesis", "no feasible ray combination")
    return hyps


# ----------------------------------------------------------------------------
# ranking


def _check_size(labels_hw, labels: LabelMap):
    if labels_hw != (labels.height, labels.width):
        raise LayoutError(
            "dimension-mismatch", f"hypothesis {labels_hw[::-1]} vs label map {(labels.width, labels.height)}"
        )


def score_labels(face_labels, labels: LabelMap) -> float:
    face_labels = np.asarray(face_labels)
    _check_size(face_labels.shape, labels)
    P = labels.probabilities
    total = sum(float(P[..., k][face_labels == k].sum()) for k in range(NUM_CLASSES))
    return total / face_labels.size


def score_hypothesis(h: LayoutHypothesis, labels: LabelMap) -> float:
    """Mean probability, over pixels, of each pixel's hypothesized surface."""
    return score_labels(h.labels, labels)


def lift_hypothesis(h: LayoutHypothesis, camera_height: float):
    """Metric room and posed camera for a hypothesis.

    The world origin is put on the back-wall floor corner that is visible and
    closest to the image center; failing that, on the corner whose vertical
    wall edge shows in the image; failing that, on the one nearest the center.
    """
    lo, hi = h.unit_bounds()
    lo = lo * camera_height
    hi = hi * camera_height
    cam0 = h.camera.with_center(np.zeros(3))
    w, ht = cam0.image_size
    center = np.array([w, ht]) / 2.0

    def rank(corner):
        top = corner + np.array([0.0, 0.0, hi[2] - lo[2]])
        px, depth = cam0.project_many(np.array([corner, top]))
        visible = depth[0] > 0 and 0 <= px[0, 0] <= w and 0 <= px[0, 1] <= ht
        edge = _segment_in_image(cam0, corner, top)
        dist = np.linalg.norm(px[0] - center) if depth[0] > 0 else np.inf
        return (not visible, not edge, dist)

    corners = [np.array([lo[0], hi[1], lo[2]]), np.array([hi[0], hi[1], lo[2]])]
    origin = min(corners, key=lambda c: rank(c))
    room = RoomBox(lo - origin, *(hi - lo))
    camera = h.camera.with_center(-origin)
    return room, camera


def _segment_in_image(camera, a, b, n=32):
    t = np.linspace(0.0, 1.0, n)[:, None]
    px, depth = camera.project_many(a + t * (b - a))
    w, h = camera.image_size
    ok = (depth > 0) & (px[:, 0] >= 0) & (px[:, 0] <= w) & (px[:, 1] >= 0) & (px[:, 1] <= h)
    return bool(ok.any())


def select_layout(hypotheses, labels: LabelMap, camera_height: float = 1.6):
    """Best-scoring hypothesis with its metric room and posed camera.

    Ties go to the hypothesis generated first.
    """
    if not hypotheses:
        raise LayoutError("no-hypothesis", "empty hypothesis list")
    best, best_score = None, -np.inf
    for h in hypotheses:
        s = score_hypothesis(h, labels)
        if s > best_score:
            best, best_score = h, s
        # labels are cached per hypothesis; drop them to bound memory
        h.__dict__.pop("labels", None)
    room, camera = lift_hypothesis(best, camera_height)
    return best, room, camera


def pixel_error(predicted, truth) -> float:
    """Percentage of pixels whose surface labels differ."""
    p = predicted.labels if isinstance(predicted, LayoutHypothesis) else np.asarray(predicted)
    t = truth.argmax() if isinstance(truth, LabelMap) else np.asarray(truth)
    if p.shape != t.shape:
        raise LayoutError("dimension-mismatch", f"{p.shape} vs {t.shape}")
    return 100.0 * float(np.count_nonzero(p != t)) / p.size


# ----------------------------------------------------------------------------
# classical fallback label map


def classical_label_map(image, camera: Camera, triple=None, sharpness: float = 12.0) -> LabelMap:
    """Surface probabilities from geometry and texture alone.

    Floor is favoured below the horizon where the image is smooth, ceiling
    above it; walls split by azimuth around the directions bounding the
    vertical-edge inliers.  Only meant to keep the pipeline running without a
    learned label map.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    dirs = camera.pixel_grid_directions()
    el = np.arcsin(np.clip(dirs[..., 2], -1, 1))
    az = azimuth(dirs)
    grad = ndimage.gaussian_gradient_magnitude(img, 1.5)
    smooth = np.exp(-grad / (grad.mean() + 1e-9))

    if triple is not None and len(triple.inliers[2]):
        az_seg = _segment_angles(camera, triple.inlier_segments(2), azimuth)
        a_left, a_right = np.percentile(az_seg, 10), np.percentile(az_seg, 90)
    else:
        a_left, a_right = np.percentile(az, 20), np.percentile(az, 80)

    def sig(x):
        return 1.0 / (1.0 + np.exp(-x))

    floor = sig(-sharpness * (el + 0.15)) * (0.5 + 0.5 * smooth)
    ceiling = sig(sharpness * (el - 0.25)) * (0.5 + 0.5 * smooth)
    vertical = 1.0 - np.maximum(floor, ceiling)
    left = vertical * sig(-sharpness * (az - a_left))
    right = vertical * sig(sharpness * (az - a_right))
    middle = np.clip(vertical - left - right, 0.0, None)
    stack = np.stack([ceiling, floor, left, middle, right], axis=-1) + 1e-3
    stack = ndimage.gaussian_filter(stack, sigma=(3, 3, 0))
    stack /= stack.sum(axis=2, keepdims=True)
    return LabelMap(stack)
