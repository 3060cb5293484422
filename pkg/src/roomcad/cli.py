"""Command line interface.

    roomcad reconstruct --image room.png [--detections d.json] [--labelmap l.f32] --out-dir out/
    roomcad render --scene out/scene.json [--turn 180 | --camera cam.json] --out view.png
    roomcad evaluate --pred out/scene.json --truth truth.json [--pred-labels ...] [--truth-labels ...]
    roomcad viewgrid [--models-dir models/] --out-dir cache/
    roomcad trace-plot --trace out/trace.csv --out curve.png

Exit codes: 0 success, 2 bad input, 3 a pipeline stage failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import sceneio
from .cadlib import ViewDatabase, load_library
from .config import ConfigError, load_config
from .detections import DetectionError
from .errors import CadError, RoomCadError, SceneFormatError, StageError
from .geometry import Camera, rotation_z
from .io import FormatError, read_f32map, write_image
from .layout import LayoutError, pixel_error
from .metrics import evaluate_scenes
from .refine import read_trace_csv, write_trace_csv

EXIT_OK, EXIT_INPUT, EXIT_STAGE = 0, 2, 3

INPUT_ERRORS = (FormatError, SceneFormatError, DetectionError, ConfigError, LayoutError, CadError, OSError)


class InputError(Exception):
    pass


def _warn(msg):
    print(f"warning: {msg}", file=sys.stderr)


def _out_dir(args) -> Path:
    out = Path(args.out_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_reconstruct(args) -> int:
    from .pipeline import load_inputs, run_pipeline

    cfg = load_config(args.config)
    img, dets, labels = load_inputs(args.image, args.detections, args.labelmap)
    out = _out_dir(args)
    dump = out / "intermediates" if args.dump_intermediates else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_pipeline(img, dets, labels, cfg, models_dir=args.models_dir, dump_dir=dump)
    for w in res.warnings:
        _warn(w)
    sceneio.save_scene(out / "scene.json", res.scene, res.camera)
    write_image(out / "render.png", res.render)
    write_image(out / "side_by_side.png", np.concatenate([img, res.render], axis=1))
    if res.trace:
        write_trace_csv(res.trace, out / "trace.csv")
    print(f"wrote {out / 'scene.json'} ({len(res.scene.objects)} objects, {len(res.scene.windows)} windows)")
    return EXIT_OK


def camera_from_dict(d: dict) -> Camera:
    try:
        return Camera(d["focal"], d["principal_point"], np.array(d["rotation"], dtype=float), d["center"], tuple(d["image_size"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"bad camera file: {exc!r}") from exc


def turned(camera: Camera, degrees: float) -> Camera:
    """The same camera turned about the vertical axis through its center."""
    from dataclasses import replace

    # world->camera composed with a world rotation about z
    R = camera.rotation @ rotation_z(math.radians(degrees))
    return replace(camera, rotation=R)


def cmd_render(args) -> int:
    from .render import rasterize

    scene, camera = sceneio.load_scene(args.scene)
    if args.camera:
        try:
            camera = camera_from_dict(json.loads(Path(args.camera).read_text()))
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.camera}: {exc}") from exc
    if args.turn:
        camera = turned(camera, args.turn)
    models = {k: m.triangles for k, m in load_library(args.models_dir).items()} if scene.objects else {}
    out = Path(args.out or (_out_dir(args) / "render.png"))
    write_image(out, rasterize(scene, camera, models).rgb)
    print(f"wrote {out}")
    return EXIT_OK


def _label_raster(path) -> np.ndarray:
    a = read_f32map(path)
    return np.rint(a[..., 0]).astype(int) if a.shape[2] == 1 else np.argmax(a, axis=2)


def cmd_evaluate(args) -> int:
    pred, pcam = sceneio.load_scene(args.pred)
    truth, tcam = sceneio.load_scene(args.truth)
    try:
        report = evaluate_scenes(pred, pcam, truth, tcam)
    except RoomCadError as exc:
        if exc.code == "camera-mismatch":
            raise InputError(str(exc)) from exc
        raise
    if args.pred_labels and args.truth_labels:
        report = {"pixel_error": pixel_error(_label_raster(args.pred_labels), _label_raster(args.truth_labels)), **report}
    report = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in report.items()}
    text = json.dumps(report, indent=2) + "\n"
    if args.out_dir:
        (_out_dir(args) / "report.json").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_viewgrid(args) -> int:
    out = _out_dir(args)
    db = ViewDatabase.build(load_library(args.models_dir))
    db.save(out)
    print(f"wrote {len(db.entries)} views to {out}")
    return EXIT_OK


def cmd_trace_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_trace_csv(args.trace)
    if not rows:
        raise InputError(f"{args.trace}: empty trace")
    ev = [r.evaluation for r in rows]
    fig, (a0, a1) = plt.subplots(1, 2, figsize=(10, 4))
    a0.plot(ev, [r.cost for r in rows], lw=0.8, alpha=0.5, label="evaluated")
    a0.plot(ev, [r.best for r in rows], lw=1.5, label="best so far")
    a0.set_xlabel("evaluation")
    a0.set_ylabel("cosine cost")
    a0.legend()
    layers = np.array([r.layers for r in rows])
    best_layers = np.minimum.accumulate(layers, axis=0)
    for k in range(layers.shape[1]):
        a1.plot(ev, best_layers[:, k], label=f"level {k}")
    a1.set_xlabel("evaluation")
    a1.set_ylabel("per-level cost (running min)")
    a1.legend()
    fig.tight_layout()
    out = Path(args.out or (_out_dir(args) / "trace.png"))
    fig.savefig(out, dpi=100)
    plt.close(fig)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roomcad", description="Single-image room reconstruction with CAD models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--models-dir", help="directory of .obj models (default: bundled library)")
        sp.add_argument("--out-dir", help="output directory")
        sp.add_argument("--seed", type=int, default=0, help="reserved; every stage is deterministic")

    r = sub.add_parser("reconstruct", help="image to scene file")
    common(r)
    r.add_argument("--image", required=True)
    r.add_argument("--detections")
    r.add_argument("--labelmap")
    r.add_argument("--config")
    r.add_argument("--dump-intermediates", action="store_true")
    r.set_defaults(func=cmd_reconstruct)

    r = sub.add_parser("render", help="rasterize a scene file")
    common(r)
    r.add_argument("--scene", required=True)
    r.add_argument("--camera", help="JSON camera replacing the scene's own")
    r.add_argument("--turn", type=float, default=0.0, help="turn the camera about the vertical by this many degrees")
    r.add_argument("--out", help="output image (.png or .ppm)")
    r.set_defaults(func=cmd_render)

    r = sub.add_parser("evaluate", help="compare a predicted scene with ground truth")
    common(r)
    r.add_argument("--pred", required=True)
    r.add_argument("--truth", required=True)
    r.add_argument("--pred-labels", help="F32MAP surface labels of the prediction")
    r.add_argument("--truth-labels", help="F32MAP ground-truth surface labels")
    r.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("viewgrid", help="build the CAD view-grid cache")
    common(r)
    r.set_defaults(func=cmd_viewgrid)

    r = sub.add_parser("trace-plot", help="plot a refinement trace")
    common(r)
    r.add_argument("--trace", required=True)
    r.add_argument("--out", help="output image")
    r.set_defaults(func=cmd_trace_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RoomCadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
