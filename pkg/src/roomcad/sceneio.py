"""Scene files: a compact, human-readable JSON description of a
reconstructed room (camera, room box, placed models, windows, colours).

All reals are written with 9 significant digits.  ``quantize`` rounds an
in-memory scene the same way, so for a quantized scene
``loads(dumps(scene, camera)) == (scene, camera)`` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import SceneFormatError
from .geometry import Camera
from .scene import Appearance, RoomBox, Scene, SceneObject, WindowPlacement

SCHEMA = "roomcad.scene/1"
DIGITS = 9
TWO_PI = 2 * math.pi


def q(x: float) -> float:
    """Round to 9 significant digits."""
    return float(f"{float(x):.{DIGITS}g}")


def _qa(a) -> list:
    return [q(v) for v in np.asarray(a, dtype=float).ravel()]


def _qyaw(yaw: float) -> float:
    y = q(yaw)
    return 0.0 if y >= TWO_PI else y


def quantize_camera(cam: Camera) -> Camera:
    return Camera(
        q(cam.focal),
        _qa(cam.principal_point),
        np.reshape(_qa(cam.rotation), (3, 3)),
        _qa(cam.center),
        cam.image_size,
    )


def quantize(scene: Scene) -> Scene:
    room = RoomBox(_qa(scene.room.origin), q(scene.room.width), q(scene.room.depth), q(scene.room.height))
    objs = [
        replace(o, position=np.array(_qa(o.position)), scale=np.array(_qa(o.scale)), yaw=_qyaw(o.yaw))
        for o in scene.objects
    ]
    wins = [replace(w, rect=tuple(_qa(w.rect))) for w in scene.windows]
    return Scene(room, objs, wins, Appearance(dict(scene.appearance.surfaces)))


def to_dict(scene: Scene, camera: Camera) -> dict:
    cam = quantize_camera(camera)
    sc = quantize(scene)
    return {
        "schema": SCHEMA,
        "camera": {
            "focal": cam.focal,
            "principal_point": list(cam.principal_point),
            "rotation": [list(r) for r in cam.rotation],
            "center": list(cam.center),
            "height": cam.center[2],
            "image_size": list(cam.image_size),
        },
        "room": {
            "origin": list(sc.room.origin),
            "width": sc.room.width,
            "depth": sc.room.depth,
            "height": sc.room.height,
        },
        "surfaces": {k: list(v) for k, v in sorted(sc.appearance.surfaces.items())},
        "objects": [
            {
                "model_id": o.model_id,
                "category": o.category,
                "position": list(o.position),
                "scale": list(o.scale),
                "yaw": o.yaw,
                "color": list(o.color),
            }
            for o in sc.objects
        ],
        "windows": [{"wall": w.wall, "rect": list(w.rect), "color": list(w.color)} for w in sc.windows],
    }


def dumps(scene: Scene, camera: Camera) -> str:
    return json.dumps(to_dict(scene, camera), indent=2) + "\n"


def from_dict(d: dict):
    try:
        if d.get("schema") != SCHEMA:
            raise SceneFormatError("bad-schema", f"expected schema {SCHEMA!r}, got {d.get('schema')!r}")
        c = d["camera"]
        center = c.get("center", [0.0, 0.0, c["height"]])
        camera = Camera(c["focal"], c["principal_point"], np.array(c["rotation"], dtype=float), center, tuple(c["image_size"]))
        r = d["room"]
        room = RoomBox(r["origin"], r["width"], r["depth"], r["height"])
        objs = [
            SceneObject(o["model_id"], o["category"], o["position"], o["scale"], o["yaw"], tuple(o["color"]))
            for o in d.get("objects", [])
        ]
        wins = [WindowPlacement(w["wall"], tuple(w["rect"]), tuple(w["color"])) for w in d.get("windows", [])]
        surfaces = dict(Appearance().surfaces)
        surfaces.update({k: tuple(int(x) for x in v) for k, v in d.get("surfaces", {}).items()})
    except SceneFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneFormatError("bad-scene", f"malformed scene: {exc!r}") from exc
    return Scene(room, objs, wins, Appearance(surfaces)), camera


def loads(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SceneFormatError("bad-scene", f"not JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise SceneFormatError("bad-scene", "top level must be an object")
    return from_dict(d)


def save_scene(path, scene: Scene, camera: Camera) -> None:
    Path(path).write_text(dumps(scene, camera))


def load_scene(path):
    """``(scene, camera)`` from a scene file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SceneFormatError("unreadable-scene", f"{path}: {exc}") from exc
    return loads(text)


def scenes_equal(a: Scene, b: Scene) -> bool:
    """Exact equality of every field (arrays compared elementwise)."""
    if a.room.width != b.room.width or a.room.depth != b.room.depth or a.room.height != b.room.height:
        return False
    if not np.array_equal(a.room.origin, b.room.origin):
        return False
    if len(a.objects) != len(b.objects) or len(a.windows) != len(b.windows):
        return False
    for x, y in zip(a.objects, b.objects):
        if (x.model_id, x.category, x.yaw, x.color) != (y.model_id, y.category, y.yaw, y.color):
            return False
        if not (np.array_equal(x.position, y.position) and np.array_equal(x.scale, y.scale)):
            return False
    for x, y in zip(a.windows, b.windows):
        if (x.wall, x.rect, x.color) != (y.wall, y.rect, y.color):
            return False
    return dict(a.appearance.surfaces) == dict(b.appearance.surfaces)
