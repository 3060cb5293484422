"""Object detection records: validation, score thresholding and greedy NMS.

Detection files are JSON::

    {"detections": [
        {"category": "chair", "bbox": [x_min, y_min, x_max, y_max], "score": 0.93},
        ...
    ]}

A bare top-level list of records is accepted as well.  ``bbox`` is in pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DetectionError
from .scene import CATEGORIES


@dataclass(frozen=True)
class Detection:
    category: str
    bbox: tuple
    score: float

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise DetectionError("unknown-category", repr(self.category))
        bbox = tuple(float(v) for v in self.bbox)
        if len(bbox) != 4:
            raise DetectionError("bad-bbox", f"expected 4 numbers, got {len(bbox)}")
        x0, y0, x1, y1 = bbox
        if not (x0 < x1 and y0 < y1):
            raise DetectionError("bad-bbox", f"degenerate box {bbox}")
        score = float(self.score)
        if not 0.0 <= score <= 1.0:
            raise DetectionError("bad-score", f"score {score} outside [0, 1]")
        object.__setattr__(self, "bbox", bbox)
        object.__setattr__(self, "score", score)

    @property
    def area(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return (x1 - x0) * (y1 - y0)

    def to_dict(self) -> dict:
        return {"category": self.category, "bbox": list(self.bbox), "score": self.score}


def iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


def threshold(dets, min_score: float = 0.5) -> list:
    """Detections scoring strictly above ``min_score``, order preserved."""
    return [d for d in dets if d.score > min_score]


def _rank_key(d):
    return (-d.score, d.bbox)


def nms(dets, iou_threshold: float = 0.3) -> list:
    """Greedy per-category non-maximum suppression.

    Within each category the highest-scoring remaining box is kept and every
    box overlapping it by IoU > ``iou_threshold`` is dropped.  Score ties are
    broken by lexicographic bbox order, so the result does not depend on the
    input order.  Output is sorted by (category, -score, bbox).
    """
    if not 0.0 < iou_threshold < 1.0:
        raise DetectionError("bad-threshold", f"IoU threshold {iou_threshold} not in (0, 1)")
    kept = []
    for cat in sorted({d.category for d in dets}):
        group = sorted((d for d in dets if d.category == cat), key=_rank_key)
        if not group:
            continue
        boxes = np.array([d.bbox for d in group])
        areas = (boxes[:, 2] - boxes[:, 0]) * (boxes[:, 3] - boxes[:, 1])
        alive = np.ones(len(group), dtype=bool)
        for i in range(len(group)):
            if not alive[i]:
                continue
            kept.append(group[i])
            rest = np.nonzero(alive)[0]
            rest = rest[rest > i]
            if not len(rest):
                break
            iw = np.clip(np.minimum(boxes[i, 2], boxes[rest, 2]) - np.maximum(boxes[i, 0], boxes[rest, 0]), 0, None)
            ih = np.clip(np.minimum(boxes[i, 3], boxes[rest, 3]) - np.maximum(boxes[i, 1], boxes[rest, 1]), 0, None)
            inter = iw * ih
            ov = inter / (areas[i] + areas[rest] - inter)
            alive[rest[ov > iou_threshold]] = False
    return kept


def parse_detections(data) -> list:
    records = data.get("detections") if isinstance(data, dict) else data
    if not isinstance(records, list):
        raise DetectionError("bad-file", "expected a list of detection records")
    out = []
    for i, rec in enumerate(records):
        try:
            out.append(Detection(rec["category"], rec["bbox"], rec["score"]))
        except KeyError as exc:
            raise DetectionError("bad-file", f"record {i} lacks field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise DetectionError("bad-file", f"record {i}: {exc}") from exc
    return out


def load_detections(path) -> list:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise DetectionError("bad-file", f"{path}: {exc}") from exc
    return parse_detections(data)


def save_detections(dets, path) -> None:
    Path(path).write_text(json.dumps({"detections": [d.to_dict() for d in dets]}, indent=2) + "\n")
