"""Single-image reconstruction: vanishing points, calibration, room layout,
detections, CAD retrieval, placement, colouring and render-and-match
refinement, in that order.

Every stage failure is re-raised as ``StageError`` naming the stage.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import sceneio
from .cadlib import ViewDatabase, load_library, retrieve
from .config import Config
from .detections import load_detections, nms, threshold
from .errors import PlacementError, StageError
from .features import FeatureConfig, extract
from .io import read_f32map, to_gray, write_f32map, write_image
from .layout import LabelMap, classical_label_map, generate_hypotheses, select_layout
from .placement import place_object, place_window
from .refine import refine_scene, write_trace_csv
from .render import assign_colors, rasterize
from .scene import Scene
from .vanishing import calibrate, estimate_vanishing_points, extract_segments


@dataclass
class PipelineResult:
    scene: Scene
    camera: object
    render: np.ndarray
    trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)


class _Stage:
    """Context manager that wraps any exception in a StageError."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def load_labelmap(path) -> LabelMap:
    """A label map file: F32MAP with 5 probability channels, or 1 channel of
    class indices 0..4."""
    arr = read_f32map(path)
    if arr.shape[2] == 1:
        return LabelMap.one_hot(np.rint(arr[..., 0]).astype(int))
    return LabelMap(arr)


def load_views(models: dict, models_dir=None) -> ViewDatabase:
    """View-grid cache from ``models_dir`` when present, else rendered now."""
    if models_dir is not None and any(Path(models_dir).glob("*.vgc")):
        return ViewDatabase.load(models_dir)
    return ViewDatabase.build(models)


def crop(image, bbox) -> np.ndarray:
    h, w = image.shape[:2]
    x0, y0, x1, y1 = bbox
    c0, r0 = max(0, int(np.floor(x0))), max(0, int(np.floor(y0)))
    c1, r1 = min(w, int(np.ceil(x1))), min(h, int(np.ceil(y1)))
    return image[r0:r1, c0:c1]


def run_pipeline(
    image,
    detections=None,
    labelmap=None,
    config: Config | None = None,
    models_dir=None,
    views: ViewDatabase | None = None,
    dump_dir=None,
) -> PipelineResult:
    """Reconstruct a room scene from one RGB image.

    ``detections`` is a list of Detection (or None: empty room), ``labelmap``
    a LabelMap (or None: classical fallback).  ``views`` may pass a
    prebuilt view database to skip rendering the model library.
    """
    cfg = config or Config()
    img = np.asarray(image)
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img * 255 if img.max() <= 1.0 else img), 0, 255).astype(np.uint8)
    h, w = img.shape[:2]
    notes = []
    dump = Path(dump_dir) if dump_dir is not None else None
    if dump is not None:
        dump.mkdir(parents=True, exist_ok=True)

    def note(msg):
        notes.append(msg)
        warnings.warn(msg, stacklevel=3)

    with _Stage("vanishing"):
        segments = extract_segments(to_gray(img))
        triple = estimate_vanishing_points(
            segments, (w, h), inlier_angle_deg=cfg.inlier_angle_deg, orthogonality_tol_deg=cfg.orthogonality_tol_deg
        )
    with _Stage("calibrate"):
        camera = calibrate(triple, (w, h))
    with _Stage("layout"):
        if labelmap is None:
            note("no label map supplied; using the classical fallback")
            labelmap = classical_label_map(img, camera, triple)
        hyps = generate_hypotheses(camera, triple, cfg.rays_per_vp)
        best, room, camera = select_layout(hyps, labelmap, cfg.camera_height)
        scene = Scene(room)
    if dump is not None:
        vps = {k: list(map(float, v)) for k, v in zip(("vp_x", "vp_y", "vp_z"), triple.points)}
        (dump / "vanishing.json").write_text(json.dumps({"segments": len(segments), **vps}, indent=2) + "\n")
        write_f32map(dump / "labelmap.f32", labelmap.probabilities)
        sceneio.save_scene(dump / "layout.json", scene, camera)

    with _Stage("detections"):
        dets = nms(threshold(list(detections or []), cfg.score_threshold), cfg.nms_iou)
        if not dets:
            note("no detections; producing an empty room")
    if dump is not None:
        (dump / "detections.json").write_text(json.dumps({"detections": [d.to_dict() for d in dets]}, indent=2) + "\n")

    objects, windows, boxes = [], [], []
    obj_dets = [d for d in dets if d.category != "window"]
    models = {}
    if obj_dets:
        with _Stage("retrieve"):
            lib = load_library(models_dir)
            models = {k: m.triangles for k, m in lib.items()}
            db = views if views is not None else load_views(lib, models_dir)
            matches = [retrieve(crop(img, d.bbox), d.category, db)[0] for d in obj_dets]
        with _Stage("place"):
            for d, (entry, _sim) in zip(obj_dets, matches):
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always")
                    objects.append(place_object(d, entry, camera, room))
                for c in caught:
                    note(str(c.message))
                boxes.append(d.bbox)
    with _Stage("place"):
        for d in dets:
            if d.category != "window":
                continue
            try:
                windows.append(place_window(d, camera, room))
            except PlacementError as exc:
                note(f"window {d.bbox} skipped ({exc.code})")
    scene = Scene(room, objects, windows)

    with _Stage("color"):
        scene = assign_colors(scene, img, camera, models, boxes)
    if dump is not None:
        sceneio.save_scene(dump / "placed.json", scene, camera)

    trace = []
    if scene.objects and cfg.refine and cfg.budget > 0:
        with _Stage("refine"):
            fcfg = FeatureConfig(levels=cfg.feature_levels, bins=cfg.feature_bins, cell=cfg.feature_cell)
            res = refine_scene(
                scene,
                camera,
                img,
                extractor=lambda im: extract(im, fcfg),
                budget=cfg.budget,
                models=models,
                method=cfg.optimizer,
                rhobeg=cfg.rho_begin,
                rhoend=cfg.rho_end,
            )
            scene, trace = res.scene, res.trace
        if dump is not None:
            write_trace_csv(trace, dump / "trace.csv")

    with _Stage("serialize"):
        scene = sceneio.quantize(scene)
        camera = sceneio.quantize_camera(camera)
        render = rasterize(scene, camera, models).rgb
    if dump is not None:
        write_image(dump / "render.png", render)
    return PipelineResult(scene, camera, render, trace, notes, {"detections": dets, "models": models})


def load_inputs(image_path, detections_path=None, labelmap_path=None):
    from .io import read_image

    img = read_image(image_path)
    dets = load_detections(detections_path) if detections_path else None
    labels = load_labelmap(labelmap_path) if labelmap_path else None
    return img, dets, labels
