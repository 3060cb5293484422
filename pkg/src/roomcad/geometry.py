"""Camera model, rays, planes and homogeneous 2D line helpers.

Conventions used throughout the package:

World frame
    Right-handed, z up, floor is the plane z = 0.  The room origin sits on a
    floor corner.

Camera frame
    x right, y down, z forward along the optical axis.

Image frame
    Origin at the top-left corner of the image, x to the right, y down, in
    pixels.  Pixel ``(col, row)`` covers ``[col, col+1) x [row, row+1)`` so its
    center is at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GeometryError

HOMOGENEOUS_EPS = 1e-9


def _vec(values, n):
    arr = np.asarray(values, dtype=float).reshape(n)
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite", f"non-finite components {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera.

    ``rotation`` maps world directions to camera directions
    (``p_cam = R @ (p_world - center)``).  ``center`` is the camera center in
    world coordinates; its z component is the camera height above the floor.
    """

    focal: float
    principal_point: np.ndarray
    rotation: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    image_size: tuple = (640, 480)

    def __post_init__(self):
        object.__setattr__(self, "focal", float(self.focal))
        object.__setattr__(self, "principal_point", _vec(self.principal_point, 2))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "center", _vec(self.center, 3))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        if not self.focal > 0:
            raise GeometryError("bad-camera", f"focal length must be positive, got {self.focal}")
        R = self.rotation
        if not np.allclose(R.T @ R, np.eye(3), atol=1e-6, rtol=0):
            raise GeometryError("bad-camera", "rotation is not orthonormal")

    @property
    def height(self) -> float:
        return float(self.center[2])

    @property
    def width_px(self) -> int:
        return self.image_size[0]

    @property
    def height_px(self) -> int:
        return self.image_size[1]

    @property
    def K(self) -> np.ndarray:
        cx, cy = self.principal_point
        return np.array([[self.focal, 0.0, cx], [0.0, self.focal, cy], [0.0, 0.0, 1.0]])

    @property
    def K_inv(self) -> np.ndarray:
        cx, cy = self.principal_point
        f = self.focal
        return np.array([[1 / f, 0.0, -cx / f], [0.0, 1 / f, -cy / f], [0.0, 0.0, 1.0]])

    @property
    def optical_axis(self) -> np.ndarray:
        """Viewing direction in world coordinates."""
        return self.rotation[2].copy()

    def with_center(self, center) -> "Camera":
        return replace(self, center=np.asarray(center, dtype=float))

    def with_height(self, height: float) -> "Camera":
        c = self.center.copy()
        c[2] = height
        return replace(self, center=c)

    def to_camera(self, points) -> np.ndarray:
        """World points (..., 3) to camera-frame coordinates."""
        pts = np.asarray(points, dtype=float)
        return (pts - self.center) @ self.rotation.T

    def project_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized projection; returns ``(pixels (...,2), depth (...))``.

        No behind-camera check; callers mask on ``depth > 0`` themselves.
        """
        pc = self.to_camera(points)
        z = pc[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.focal * pc[..., 0] / z + self.principal_point[0]
            v = self.focal * pc[..., 1] / z + self.principal_point[1]
        return np.stack([u, v], axis=-1), z

    def pixel_directions(self, pixels) -> np.ndarray:
        """Unit world-frame ray directions through pixel coordinates (..., 2)."""
        px = np.asarray(pixels, dtype=float)
        d_cam = np.stack(
            [
                (px[..., 0] - self.principal_point[0]) / self.focal,
                (px[..., 1] - self.principal_point[1]) / self.focal,
                np.ones(px.shape[:-1]),
            ],
            axis=-1,
        )
        d = d_cam @ self.rotation  # R^T applied row-wise
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def pixel_grid_directions(self) -> np.ndarray:
        """World directions through every pixel center, shape (H, W, 3)."""
        w, h = self.image_size
        cols, rows = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        return self.pixel_directions(np.stack([cols, rows], axis=-1))

    def horizon_line(self) -> np.ndarray:
        """Homogeneous image line of the vanishing points of horizontal directions."""
        n_cam = self.rotation @ np.array([0.0, 0.0, 1.0])
        line = self.K_inv.T @ n_cam
        return line / np.linalg.norm(line[:2])

    def vanishing_point(self, direction) -> np.ndarray:
        """Homogeneous image point where world lines along ``direction`` converge."""
        v = self.K @ (self.rotation @ np.asarray(direction, dtype=float))
        return v / np.linalg.norm(v)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = _vec(self.origin, 3)
        d = _vec(self.direction, 3)
        n = np.linalg.norm(d)
        if n == 0:
            raise GeometryError("bad-ray", "zero direction")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)

    def at(self, t: float) -> np.ndarray:
        return self.origin + t * self.direction


@dataclass(frozen=True)
class Plane:
    """The set ``{p : normal . p = offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _vec(self.normal, 3)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise GeometryError("bad-plane", "zero normal")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    @classmethod
    def ground(cls) -> "Plane":
        return cls(np.array([0.0, 0.0, 1.0]), 0.0)


def project(camera: Camera, point) -> np.ndarray:
    """Project a world point to pixel coordinates."""
    p = camera.to_camera(_vec(point, 3))
    if p[2] <= 0:
        raise GeometryError("behind-camera", f"depth {p[2]:.6g} <= 0")
    return np.array(
        [
            camera.focal * p[0] / p[2] + camera.principal_point[0],
            camera.focal * p[1] / p[2] + camera.principal_point[1],
        ]
    )


def cast_ray(camera: Camera, pixel) -> Ray:
    """Ray from the camera center through an image point."""
    px = _vec(pixel, 2)
    return Ray(camera.center, camera.pixel_directions(px))


def intersect_ray_plane(ray: Ray, plane: Plane) -> np.ndarray:
    denom = float(ray.direction @ plane.normal)
    if abs(denom) <= 1e-9:
        raise GeometryError("no-intersection", "ray is parallel to the plane")
    t = (plane.offset - float(plane.normal @ ray.origin)) / denom
    if t <= 0:
        raise GeometryError("behind-origin", f"intersection at t={t:.6g}")
    return ray.at(t)


def homogeneous_line(p, q) -> np.ndarray:
    """Homogeneous line through two image points."""
    return np.cross([p[0], p[1], 1.0], [q[0], q[1], 1.0])


def line_intersection_homogeneous(l1, l2):
    """Intersect two homogeneous lines.

    Returns ``(point, finite)``.  For a finite intersection ``point`` is the
    pixel ``(x, y)``; otherwise it is the unit 2D direction of the point at
    infinity.
    """
    a = np.asarray(l1, dtype=float).reshape(3)
    b = np.asarray(l2, dtype=float).reshape(3)
    if not a.any() or not b.any():
        raise GeometryError("degenerate", "zero line vector")
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    x = np.cross(a, b)
    norm = np.linalg.norm(x)
    if norm <= 1e-12:
        raise GeometryError("degenerate", "identical lines")
    x = x / norm
    if abs(x[2]) > HOMOGENEOUS_EPS:
        return x[:2] / x[2], True
    d = x[:2] / np.linalg.norm(x[:2])
    return d, False


def normalize_homogeneous(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def is_finite_point(v) -> bool:
    v = normalize_homogeneous(v)
    return abs(v[2]) > HOMOGENEOUS_EPS


def rotation_angle_between(R1, R2) -> float:
    """Geodesic distance between two rotations, in radians."""
    c = (np.trace(np.asarray(R1).T @ np.asarray(R2)) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def rotation_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def look_rotation(yaw: float, pitch: float, roll: float = 0.0) -> np.ndarray:
    """World-to-camera rotation for a camera looking along world +y.

    ``yaw`` turns the view to the right (clockwise seen from above), ``pitch``
    tilts it upward (negative looks down), ``roll`` rotates about the view
    direction.  All in radians.
    """
    # camera axes expressed in world coordinates at yaw = pitch = roll = 0
    base = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    Rz = rotation_z(-yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    cr, sr = np.cos(roll), np.sin(roll)
    Rroll = np.array([[cr, -sr, 0.0], [sr, cr, 0.0], [0.0, 0.0, 1.0]])
    # rows of the world->camera matrix are camera axes in world coordinates
    axes_world = (Rz @ Rx @ base.T).T
    return Rroll @ axes_world


def nearest_rotation(M) -> np.ndarray:
    """Closest proper rotation to ``M`` in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    D = np.diag([1.0, 1.0, np.linalg.det(U @ Vt)])
    return U @ D @ Vt
