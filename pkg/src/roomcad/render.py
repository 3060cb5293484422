"""Triangle rasterizer with a z-buffer, plus medoid colour extraction.

Depth is the camera-frame z coordinate (distance along the optical axis).
Room faces, windows and objects all go through the same triangle path;
near-plane clipping happens in camera space before projection.  Inverse
depth is interpolated linearly in screen space, which is exact for planar
triangles.

Every pixel also records an owner id:

    -1            background
    0..5          room surfaces (ceiling, floor, left, middle, right, front)
    WINDOW_BASE+j window j
    OBJECT_BASE+i object i
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import RenderError
from .geometry import Camera
from .scene import SURFACE_NAMES, Scene

BACKGROUND = -1
FRONT = 5
WINDOW_BASE = 100
OBJECT_BASE = 1000
NEAR = 1e-3
WINDOW_INSET = 2e-3
LIGHT = np.array([-0.35, -0.55, 0.76]) / np.linalg.norm([-0.35, -0.55, 0.76])
AMBIENT, DIFFUSE = 0.6, 0.4

ROOM_FACE_NAMES = SURFACE_NAMES + ("front",)


@dataclass
class Raster:
    rgb: np.ndarray  # (H, W, 3) uint8
    depth: np.ndarray  # (H, W) float32, +inf where nothing was drawn
    owner: np.ndarray  # (H, W) int32

    @property
    def size(self):
        return self.rgb.shape[1], self.rgb.shape[0]

    def copy(self) -> "Raster":
        return Raster(self.rgb.copy(), self.depth.copy(), self.owner.copy())


@dataclass
class Triangles:
    """A flat triangle soup with per-triangle colour and owner id."""

    verts: np.ndarray  # (T, 3, 3) world coordinates
    colors: np.ndarray  # (T, 3)
    owners: np.ndarray  # (T,)

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3, 3)), np.zeros((0, 3)), np.zeros(0, dtype=int))

    @classmethod
    def concat(cls, parts):
        parts = [p for p in parts if len(p.verts)]
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.verts for p in parts]),
            np.concatenate([p.colors for p in parts]),
            np.concatenate([p.owners for p in parts]),
        )


def quad_triangles(quad) -> np.ndarray:
    q = np.asarray(quad, dtype=float)
    return np.array([[q[0], q[1], q[2]], [q[0], q[2], q[3]]])


def unit_box_triangles() -> np.ndarray:
    """The 12 triangles of the unit cube [0,1]^3."""
    c = np.array(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]],
        dtype=float,
    )
    faces = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)]
    return np.concatenate([quad_triangles(c[list(f)]) for f in faces])


BUILTIN_MODELS = {"box": unit_box_triangles()}


def model_triangles(model_id: str, models) -> np.ndarray:
    if models is not None and model_id in models:
        m = models[model_id]
        return np.asarray(getattr(m, "triangles", m), dtype=float)
    if model_id in BUILTIN_MODELS:
        return BUILTIN_MODELS[model_id]
    raise RenderError("unknown-model", f"no mesh for model id {model_id!r}")


def room_triangles(scene: Scene) -> Triangles:
    lo, hi = scene.room.lo, scene.room.hi
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    quads = {
        "ceiling": [(x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)],
        "floor": [(x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0)],
        "left": [(x0, y0, z0), (x0, y1, z0), (x0, y1, z1), (x0, y0, z1)],
        "middle": [(x0, y1, z0), (x1, y1, z0), (x1, y1, z1), (x0, y1, z1)],
        "right": [(x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)],
        "front": [(x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)],
    }
    colors = scene.appearance.surfaces
    parts = []
    for owner, name in enumerate(ROOM_FACE_NAMES):
        tris = quad_triangles(quads[name])
        col = np.asarray(colors.get(name, (200, 200, 200)), dtype=float)
        parts.append(Triangles(tris, np.tile(col, (2, 1)), np.full(2, owner)))
    for j, win in enumerate(scene.windows):
        tris = quad_triangles(win.corners(scene.room, inset=WINDOW_INSET))
        col = np.asarray(win.color, dtype=float)
        parts.append(Triangles(tris, np.tile(col, (2, 1)), np.full(2, WINDOW_BASE + j)))
    return Triangles.concat(parts)


def object_triangles(scene: Scene, models=None) -> Triangles:
    parts = []
    for i, obj in enumerate(scene.objects):
        unit = model_triangles(obj.model_id, models)
        world = obj.model_to_world(unit.reshape(-1, 3)).reshape(-1, 3, 3)
        col = np.asarray(obj.color, dtype=float)
        parts.append(Triangles(world, np.tile(col, (len(world), 1)), np.full(len(world), OBJECT_BASE + i)))
    return Triangles.concat(parts)


def scene_triangles(scene: Scene, models=None) -> Triangles:
    return Triangles.concat([room_triangles(scene), object_triangles(scene, models)])


def shade(verts, colors, camera_center) -> np.ndarray:
    """Flat shading, normals flipped to face the camera.  Returns uint8 (T, 3)."""
    n = np.cross(verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
    to_cam = camera_center - verts.mean(axis=1)
    n *= np.where((n * to_cam).sum(axis=1) < 0, -1.0, 1.0)[:, None]
    k = AMBIENT + DIFFUSE * np.maximum(0.0, n @ LIGHT)
    return np.clip(np.round(colors * k[:, None]), 0, 255).astype(np.uint8)


def blank_raster(camera: Camera) -> Raster:
    w, h = camera.image_size
    return Raster(
        np.zeros((h, w, 3), dtype=np.uint8),
        np.full((h, w), np.inf, dtype=np.float32),
        np.full((h, w), BACKGROUND, dtype=np.int32),
    )


def _clip_near(tri_cam):
    """Clip one camera-space triangle to z >= NEAR; returns a polygon list."""
    out = []
    for i in range(3):
        cur, prev = tri_cam[i], tri_cam[i - 1]
        cin, pin = cur[2] >= NEAR, prev[2] >= NEAR
        if cin != pin:
            t = (NEAR - prev[2]) / (cur[2] - prev[2])
            out.append(prev + t * (cur - prev))
        if cin:
            out.append(cur)
    return out


def _fill(raster, zbuf, p, iz, color, owner):
    """Fill one projected triangle: ``p`` (3, 2) pixels, ``iz`` (3,) inverse depths."""
    h, w = zbuf.shape
    x_lo = max(int(np.floor(p[:, 0].min() - 0.5)), 0)
    x_hi = min(int(np.ceil(p[:, 0].max() - 0.5)), w - 1)
    y_lo = max(int(np.floor(p[:, 1].min() - 0.5)), 0)
    y_hi = min(int(np.ceil(p[:, 1].max() - 0.5)), h - 1)
    if x_lo > x_hi or y_lo > y_hi:
        return
    area = (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    if abs(area) < 1e-12:
        return
    xs = np.arange(x_lo, x_hi + 1) + 0.5
    ys = np.arange(y_lo, y_hi + 1)[:, None] + 0.5
    # barycentric weights via edge functions
    w0 = ((p[2, 0] - p[1, 0]) * (ys - p[1, 1]) - (p[2, 1] - p[1, 1]) * (xs - p[1, 0])) / area
    w1 = ((p[0, 0] - p[2, 0]) * (ys - p[2, 1]) - (p[0, 1] - p[2, 1]) * (xs - p[2, 0])) / area
    w2 = 1.0 - w0 - w1
    inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
    if not inside.any():
        return
    inv = w0 * iz[0] + w1 * iz[1] + w2 * iz[2]
    depth = np.where(inside & (inv > 0), 1.0 / np.where(inv > 0, inv, 1.0), np.inf)
    sub = zbuf[y_lo : y_hi + 1, x_lo : x_hi + 1]
    win = depth < sub
    if not win.any():
        return
    sub[win] = depth[win]
    raster.rgb[y_lo : y_hi + 1, x_lo : x_hi + 1][win] = color
    raster.owner[y_lo : y_hi + 1, x_lo : x_hi + 1][win] = owner


def draw(raster: Raster, tris: Triangles, camera: Camera, zbuf=None) -> np.ndarray:
    """Draw triangles into ``raster`` in place, nearest depth winning.

    Exact depth ties keep whatever was drawn first, so results are ordered
    by (depth, draw order).  Returns the float64 z-buffer.
    """
    if zbuf is None:
        zbuf = raster.depth.astype(float)
    if len(tris.verts) == 0:
        return zbuf
    cols = shade(tris.verts, tris.colors, camera.center)
    cam = camera.to_camera(tris.verts)
    f, (cx, cy) = camera.focal, camera.principal_point
    for t in range(len(cam)):
        tri = cam[t]
        if np.all(tri[:, 2] >= NEAR):
            polys = [tri]
        else:
            poly = _clip_near(tri)
            if len(poly) < 3:
                continue
            polys = [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]
        for pc in polys:
            z = pc[:, 2]
            px = np.stack([f * pc[:, 0] / z + cx, f * pc[:, 1] / z + cy], axis=1)
            _fill(raster, zbuf, px, 1.0 / z, cols[t], tris.owners[t])
    raster.depth[...] = zbuf.astype(np.float32)
    return zbuf


def rasterize(scene: Scene, camera: Camera, models=None, base: Raster | None = None) -> Raster:
    """Render the room, windows and objects.

    ``base`` may hold a previously rendered room-only raster (see
    ``render_room``); only the objects are then drawn on top of a copy, which
    gives the same pixels as a full render.
    """
    if base is None:
        raster = blank_raster(camera)
        zbuf = draw(raster, room_triangles(scene), camera)
    else:
        raster = base.copy()
        zbuf = base.depth.astype(float)
    draw(raster, object_triangles(scene, models), camera, zbuf)
    return raster


def render_room(scene: Scene, camera: Camera) -> Raster:
    raster = blank_raster(camera)
    draw(raster, room_triangles(scene), camera)
    return raster


# ----------------------------------------------------------------------------
# medoid colours


def medoid_color(image, mask) -> tuple:
    """The in-mask colour nearest to the per-channel median.

    Distance is Euclidean in RGB; ties go to the lexicographically smallest
    colour.
    """
    img = np.asarray(image)
    m = np.asarray(mask, dtype=bool)
    if not m.any():
        raise RenderError("empty-mask", "medoid of an empty pixel set")
    pix = img[m][:, :3].astype(float)
    med = np.median(pix, axis=0)
    d = ((pix - med) ** 2).sum(axis=1)
    cand = np.unique(pix[d == d.min()], axis=0)  # unique sorts lexicographically
    return tuple(int(v) for v in cand[0])


def object_masks(scene: Scene, camera: Camera, models=None, boxes=None) -> dict:
    """Visible-pixel masks from one z-buffer pass.

    Returns ``{"objects": [mask per object], "surfaces": {name: mask}}``.
    Surface masks exclude every box in ``boxes`` (pixel bboxes, e.g. the
    detections) in addition to pixels hidden by objects.
    """
    raster = rasterize(scene, camera, models)
    objs = [raster.owner == OBJECT_BASE + i for i in range(len(scene.objects))]
    keep = np.ones(raster.owner.shape, dtype=bool)
    h, w = keep.shape
    for b in boxes or []:
        x0, y0, x1, y1 = b
        c0, c1 = max(int(np.floor(x0)), 0), min(int(np.ceil(x1)), w)
        r0, r1 = max(int(np.floor(y0)), 0), min(int(np.ceil(y1)), h)
        keep[r0:r1, c0:c1] = False
    surfaces = {name: (raster.owner == k) & keep for k, name in enumerate(ROOM_FACE_NAMES)}
    return {"objects": objs, "surfaces": surfaces}


def assign_colors(scene: Scene, image, camera: Camera, models=None, boxes=None) -> Scene:
    """Copy of ``scene`` with object and surface colours set to image medoids.

    Entities with no visible pixels keep their current colour.
    """
    from dataclasses import replace

    from .scene import Appearance

    masks = object_masks(scene, camera, models, boxes)
    objs = []
    for obj, m in zip(scene.objects, masks["objects"]):
        objs.append(replace(obj, color=medoid_color(image, m)) if m.any() else obj)
    surf = dict(scene.appearance.surfaces)
    for name, m in masks["surfaces"].items():
        if m.any():
            surf[name] = medoid_color(image, m)
    return replace(scene, objects=objs, appearance=Appearance(surf))
