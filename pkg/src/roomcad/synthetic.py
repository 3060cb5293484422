"""Forward-rendered fixtures: a known scene, its photograph, exact
detections and a one-hot label map.  Used by the tests and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cadlib import load_library
from .detections import Detection
from .geometry import Camera, look_rotation
from .layout import LabelMap, room_labels
from .render import OBJECT_BASE, WINDOW_BASE, rasterize
from .scene import RoomBox, Scene, SceneObject, WindowPlacement


@dataclass
class Fixture:
    scene: Scene
    camera: Camera
    image: np.ndarray
    detections: list
    labelmap: LabelMap
    models: dict


def mask_bbox(mask) -> tuple | None:
    """Pixel-edge bounding box (x0, y0, x1, y1) of a boolean mask."""
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        return None
    return (float(cols.min()), float(rows.min()), float(cols.max() + 1), float(rows.max() + 1))


def exact_detections(scene: Scene, camera: Camera, models=None) -> list:
    """One detection per visible object and window, boxed around its pixels."""
    owner = rasterize(scene, camera, models).owner
    dets = []
    for i, o in enumerate(scene.objects):
        b = mask_bbox(owner == OBJECT_BASE + i)
        if b is not None:
            dets.append(Detection(o.category, b, 1.0))
    for i in range(len(scene.windows)):
        b = mask_bbox(owner == WINDOW_BASE + i)
        if b is not None:
            dets.append(Detection("window", b, 1.0))
    return dets


def demo_camera() -> Camera:
    return Camera(260.0, (160.0, 120.0), look_rotation(0.5, -0.15), center=(0.5, 0.4, 1.6), image_size=(320, 240))


def demo_scene() -> Scene:
    room = RoomBox([0.0, 0.0, 0.0], 4.5, 5.5, 2.7)
    objs = [
        SceneObject("table_0", "table", (2.8, 3.6, 0.0), (1.2, 0.7, 0.75), 0.0, (120, 80, 40)),
        SceneObject("chair_0", "chair", (1.8, 3.2, 0.0), (0.45, 0.45, 0.9), 0.5 * np.pi, (60, 90, 140)),
    ]
    return Scene(room, objs, [WindowPlacement("middle", (1.0, 1.0, 1.2, 0.9))])


def make_fixture(scene: Scene | None = None, camera: Camera | None = None, models=None) -> Fixture:
    """Render ``scene`` (default: a 4.5 x 5.5 m room with a table, a chair
    and a window) and derive exact detections and a one-hot label map."""
    scene = scene or demo_scene()
    camera = camera or demo_camera()
    if models is None:
        models = {k: m.triangles for k, m in load_library().items()}
    image = rasterize(scene, camera, models).rgb
    labels = LabelMap.one_hot(room_labels(scene.room, camera))
    return Fixture(scene, camera, image, exact_detections(scene, camera, models), labels, models)


def refinement_scene() -> tuple[Scene, Camera]:
    """A table and a chair seen from near the front wall, both turned away
    from the wall axes; used to exercise render-and-match refinement."""
    room = RoomBox([0.0, 0.0, 0.0], 4.5, 5.5, 2.7)
    cam = Camera(260.0, (160.0, 120.0), look_rotation(0.1, -0.3), center=(1.8, 0.2, 1.6), image_size=(320, 240))
    objs = [
        SceneObject("table_0", "table", (2.6, 3.8, 0.0), (1.2, 0.7, 0.75), 0.3, (120, 80, 40)),
        SceneObject("chair_0", "chair", (1.5, 3.0, 0.0), (0.45, 0.45, 0.9), 1.0, (60, 90, 140)),
    ]
    return Scene(room, objs, [WindowPlacement("middle", (1.0, 1.0, 1.2, 0.9))]), cam


def perturb(scene: Scene, rng, shift: float = 0.3, turn_deg: float = 15.0) -> Scene:
    """Move every object ``shift`` meters in a random floor direction and
    turn it by ``turn_deg`` degrees in a random sense."""
    x = scene.param_vector().copy()
    for k in range(len(scene.objects)):
        a = rng.uniform(0, 2 * np.pi)
        x[7 * k : 7 * k + 2] += shift * np.array([np.cos(a), np.sin(a)])
        x[7 * k + 6] += np.radians(turn_deg) * rng.choice([-1, 1])
    return scene.with_param_vector(x)


def pose_errors(scene: Scene, truth: Scene) -> list:
    """(floor-plane distance in meters, absolute yaw difference in degrees)
    for each object against its counterpart in ``truth``."""
    out = []
    for o, g in zip(scene.objects, truth.objects):
        dyaw = (o.yaw - g.yaw + np.pi) % (2 * np.pi) - np.pi
        out.append((float(np.linalg.norm(o.position - g.position)), float(np.degrees(abs(dyaw)))))
    return out
