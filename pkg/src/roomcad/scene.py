"""Scene value types shared by placement, rendering, refinement and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import rotation_z

# surface classes, in label-map channel order
CEILING, FLOOR, LEFT, MIDDLE, RIGHT = range(5)
SURFACE_NAMES = ("ceiling", "floor", "left", "middle", "right")
WALLS = ("left", "middle", "right")

CATEGORIES = ("chair", "table", "sofa", "bookshelf", "bed", "night table", "chest", "window")


@dataclass(frozen=True)
class RoomBox:
    """Axis-aligned cuboid room.

    ``origin`` is the minimum corner (on the floor, so ``origin[2] == 0``);
    the world origin itself is one of the four floor corners.
    """

    origin: np.ndarray
    width: float
    depth: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        for name in ("width", "depth", "height"):
            v = float(getattr(self, name))
            if not v > 0:
                raise ValueError(f"room {name} must be positive, got {v}")
            object.__setattr__(self, name, v)

    @property
    def lo(self) -> np.ndarray:
        return self.origin.copy()

    @property
    def hi(self) -> np.ndarray:
        return self.origin + np.array([self.width, self.depth, self.height])

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm([self.width, self.depth, self.height]))

    def contains(self, points, margin: float = 0.0) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.all((p >= self.lo - margin) & (p <= self.hi + margin), axis=-1)

    def wall_frame(self, wall: str):
        """``(origin, u_axis, v_axis, length)`` of a wall seen from inside.

        ``u`` runs left to right for a viewer facing the wall, ``v`` is up.
        """
        lo, hi = self.lo, self.hi
        up = np.array([0.0, 0.0, 1.0])
        if wall == "middle":
            return np.array([lo[0], hi[1], 0.0]), np.array([1.0, 0.0, 0.0]), up, self.width
        if wall == "left":
            return np.array([lo[0], lo[1], 0.0]), np.array([0.0, 1.0, 0.0]), up, self.depth
        if wall == "right":
            return np.array([hi[0], hi[1], 0.0]), np.array([0.0, -1.0, 0.0]), up, self.depth
        raise ValueError(f"unknown wall {wall!r}")

    def scaled(self, s: float) -> "RoomBox":
        return RoomBox(self.origin * s, self.width * s, self.depth * s, self.height * s)


@dataclass
class SceneObject:
    """A placed CAD model.

    The model's unit cube ``[0,1]^3`` is scaled to ``scale`` meters, centered
    on ``position`` in x/y with its base at ``position[2]``, and rotated by
    ``yaw`` radians about the world z axis.
    """

    model_id: str
    category: str
    position: np.ndarray
    scale: np.ndarray
    yaw: float
    color: tuple = (128, 128, 128)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.scale = np.asarray(self.scale, dtype=float).reshape(3)
        self.yaw = float(self.yaw) % (2 * np.pi)
        self.color = tuple(int(c) for c in self.color)

    def params(self) -> np.ndarray:
        return np.r_[self.position, self.scale, self.yaw]

    def with_params(self, p) -> "SceneObject":
        p = np.asarray(p, dtype=float)
        return replace(self, position=p[:3].copy(), scale=p[3:6].copy(), yaw=float(p[6]))

    def model_to_world(self, unit_points) -> np.ndarray:
        """Map points in the normalized unit cube into world coordinates."""
        q = np.asarray(unit_points, dtype=float) - np.array([0.5, 0.5, 0.0])
        return (q * self.scale) @ rotation_z(self.yaw).T + self.position

    def box_corners(self) -> np.ndarray:
        """The eight corners of the object's oriented bounding box, bottom four first."""
        c = np.array(
            [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]],
            dtype=float,
        )
        return self.model_to_world(c)

    def contains(self, points) -> np.ndarray:
        """Inside-test against the oriented bounding box."""
        p = np.asarray(points, dtype=float) - self.position
        local = p @ rotation_z(self.yaw)  # world -> model axes
        half = 0.5 * self.scale
        return (
            (np.abs(local[..., 0]) <= half[0])
            & (np.abs(local[..., 1]) <= half[1])
            & (local[..., 2] >= 0)
            & (local[..., 2] <= self.scale[2])
        )


@dataclass
class WindowPlacement:
    """A window rectangle on a wall, in that wall's (u, v) coordinates (meters)."""

    wall: str
    rect: tuple  # (u, v, w, h)
    color: tuple = (200, 220, 240)

    def __post_init__(self):
        if self.wall not in WALLS:
            raise ValueError(f"unknown wall {self.wall!r}")
        self.rect = tuple(float(x) for x in self.rect)
        self.color = tuple(int(c) for c in self.color)

    def corners(self, room: RoomBox, inset: float = 0.0) -> np.ndarray:
        origin, u_ax, v_ax, _ = room.wall_frame(self.wall)
        normal = np.cross(u_ax, v_ax)  # points into the room
        u, v, w, h = self.rect
        pts = [(u, v), (u + w, v), (u + w, v + h), (u, v + h)]
        return np.array([origin + a * u_ax + b * v_ax + inset * normal for a, b in pts])


@dataclass
class Appearance:
    surfaces: dict = field(
        default_factory=lambda: {
            "ceiling": (235, 235, 230),
            "floor": (150, 120, 90),
            "left": (200, 195, 185),
            "middle": (215, 210, 200),
            "right": (190, 185, 175),
            "front": (205, 200, 190),
        }
    )


@dataclass
class Scene:
    room: RoomBox
    objects: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    appearance: Appearance = field(default_factory=Appearance)

    def param_vector(self) -> np.ndarray:
        if not self.objects:
            return np.zeros(0)
        return np.concatenate([o.params() for o in self.objects])

    def with_param_vector(self, x) -> "Scene":
        x = np.asarray(x, dtype=float)
        objs = [o.with_params(x[7 * i : 7 * i + 7]) for i, o in enumerate(self.objects)]
        return replace(self, objects=objs)
