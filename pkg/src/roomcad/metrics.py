"""Scene-understanding metrics: room and free-space voxel IoU, and object
localization mAP from ground-plane centroid distances.

Voxel metrics sample a 0.1 m grid anchored at the camera center.  Only
"effective" voxels count: centers between 0.5 m and 5.5 m from the camera
center (Euclidean) that project inside the image.
"""

from __future__ import annotations

import numpy as np

from .errors import MetricError
from .scene import RoomBox, Scene

VOXEL = 0.1
NEAR_RANGE, FAR_RANGE = 0.5, 5.5
THRESHOLDS = np.round(np.arange(0, 41) * 0.05, 10)  # 0 .. 2 m


def effective_voxels(camera, voxel: float = VOXEL, near: float = NEAR_RANGE, far: float = FAR_RANGE) -> np.ndarray:
    """World coordinates (K, 3) of effective voxel centers.

    Centers sit at ``center + voxel * (i + 1/2)`` for integer i; a center is
    kept when its distance to the camera center is in [near, far] and it is
    in front of the camera and projects inside the image.
    """
    n = int(np.ceil(far / voxel))
    ax = (np.arange(-n, n) + 0.5) * voxel
    W, H = camera.image_size
    K = camera.K
    out = []
    # slab by slab along world z to bound memory
    gx, gy = np.meshgrid(ax, ax, indexing="ij")
    gx, gy = gx.ravel(), gy.ravel()
    for z in ax:
        off = np.stack([gx, gy, np.full_like(gx, z)], axis=1)
        r = np.linalg.norm(off, axis=1)
        keep = (r >= near) & (r <= far)
        off = off[keep]
        pc = off @ camera.rotation.T
        front = pc[:, 2] > 0
        off, pc = off[front], pc[front]
        uvw = pc @ K.T
        u = uvw[:, 0] / uvw[:, 2]
        v = uvw[:, 1] / uvw[:, 2]
        inside = (u >= 0) & (u <= W) & (v >= 0) & (v <= H)
        out.append(off[inside] + camera.center)
    pts = np.concatenate(out) if out else np.zeros((0, 3))
    return pts


def _iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0  # both predicates empty everywhere: they agree
    return np.count_nonzero(a & b) / union


def _room_inside(room: RoomBox, pts) -> np.ndarray:
    return room.contains(pts)


def _free(scene: Scene, pts) -> np.ndarray:
    free = _room_inside(scene.room, pts)
    for obj in scene.objects:
        free &= ~obj.contains(pts)
    return free


def room_voxel_iou(pred: RoomBox, truth: RoomBox, camera) -> float:
    """IoU of the two rooms' interiors over the effective voxels."""
    pts = effective_voxels(camera)
    if len(pts) == 0:
        raise MetricError("empty-grid", "no voxel lies in the effective range")
    return _iou(_room_inside(pred, pts), _room_inside(truth, pts))


def freespace_iou(pred: Scene, truth: Scene, camera) -> float:
    """IoU of free space (inside the room, outside every object's oriented
    bounding box) over the effective voxels."""
    pts = effective_voxels(camera)
    if len(pts) == 0:
        raise MetricError("empty-grid", "no voxel lies in the effective range")
    return _iou(_free(pred, pts), _free(truth, pts))


# ----------------------------------------------------------------------------
# localization mAP


def greedy_match(pred_xy, truth_xy) -> list:
    """Greedy one-to-one matching by ascending distance.

    Returns ``[(pred_index, truth_index, distance)]``; ties break by the
    smaller prediction index, then the smaller truth index.
    """
    p = np.asarray(pred_xy, dtype=float).reshape(-1, 2)
    t = np.asarray(truth_xy, dtype=float).reshape(-1, 2)
    if len(p) == 0 or len(t) == 0:
        return []
    d = np.linalg.norm(p[:, None, :] - t[None, :, :], axis=2)
    order = sorted((d[i, j], i, j) for i in range(len(p)) for j in range(len(t)))
    used_p, used_t, out = set(), set(), []
    for dist, i, j in order:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        out.append((i, j, float(dist)))
    return out


def precision_recall(pred_xy, truth_xy, thresholds=THRESHOLDS):
    """Precision and recall at each distance threshold for one category."""
    matches = greedy_match(pred_xy, truth_xy)
    dists = np.array([m[2] for m in matches])
    n_pred = len(np.asarray(pred_xy).reshape(-1, 2))
    n_truth = len(np.asarray(truth_xy).reshape(-1, 2))
    tp = np.array([np.count_nonzero(dists <= t + 1e-12) for t in thresholds], dtype=float)
    precision = tp / n_pred if n_pred else np.zeros(len(thresholds))
    recall = tp / n_truth if n_truth else np.zeros(len(thresholds))
    return precision, recall


def average_precision(pred_xy, truth_xy, thresholds=THRESHOLDS) -> float:
    """Mean over the threshold grid of precision times recall.

    For a single pair at distance d this is the fraction of thresholds >= d.
    """
    p, r = precision_recall(pred_xy, truth_xy, thresholds)
    return float(np.mean(p * r))


def ground_centroid(obj) -> np.ndarray:
    """Ground-plane projection of the bounding-box centroid."""
    return np.asarray(obj.position, dtype=float)[:2]


def localization_map(pred_objects, truth_objects, thresholds=THRESHOLDS) -> float:
    """Mean AP over the categories present in the truth objects."""
    truth_objects = [o for o in truth_objects if o.category != "window"]
    pred_objects = [o for o in pred_objects if o.category != "window"]
    if not truth_objects:
        raise MetricError("undefined-map", "no ground-truth objects")
    cats = sorted({o.category for o in truth_objects})
    aps = []
    for c in cats:
        pxy = [ground_centroid(o) for o in pred_objects if o.category == c]
        txy = [ground_centroid(o) for o in truth_objects if o.category == c]
        aps.append(average_precision(np.reshape(pxy, (-1, 2)), np.reshape(txy, (-1, 2)), thresholds))
    return float(np.mean(aps))


# ----------------------------------------------------------------------------
# comparing scenes that live in different world frames


def camera_centered(scene: Scene, camera):
    """Translate a scene (and its camera) so the camera center is the origin."""
    from dataclasses import replace

    c = camera.center
    room = RoomBox(scene.room.origin - c, scene.room.width, scene.room.depth, scene.room.height)
    objs = [replace(o, position=o.position - c) for o in scene.objects]
    return replace(scene, room=room, objects=objs), camera.with_center(np.zeros(3))


def evaluate_scenes(pred: Scene, pred_camera, truth: Scene, truth_camera, rtol: float = 1e-6) -> dict:
    """All three metrics for a predicted scene against a ground-truth scene.

    Both scenes are moved to camera-centered frames; the cameras must share
    intrinsics and orientation (``camera-mismatch`` otherwise).
    """
    if not (
        np.allclose(pred_camera.K, truth_camera.K, rtol=rtol, atol=1e-6)
        and np.allclose(pred_camera.rotation, truth_camera.rotation, atol=1e-6)
        and tuple(pred_camera.image_size) == tuple(truth_camera.image_size)
    ):
        raise MetricError("camera-mismatch", "scenes were observed by different cameras")
    p, cam = camera_centered(pred, pred_camera)
    t, _ = camera_centered(truth, truth_camera)
    out = {"room_iou": room_voxel_iou(p.room, t.room, cam), "freespace_iou": freespace_iou(p, t, cam)}
    try:
        out["map"] = localization_map(p.objects, t.objects)
    except MetricError:
        out["map"] = float("nan")
    return out
