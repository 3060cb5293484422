import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_nms, random_dets
from roomcad.detections import Detection, iou, load_detections, nms, save_detections, threshold
from roomcad.errors import DetectionError


def test_threshold_is_strict():
    dets = [Detection("chair", (0, 0, 1, 1), s) for s in (0.9, 0.5, 0.51)]
    assert [d.score for d in threshold(dets, 0.5)] == [0.9, 0.51]


def test_threshold_empty_and_identity():
    assert threshold([]) == []
    dets = [Detection("chair", (0, 0, 1, 1), 1.0), Detection("bed", (2, 2, 5, 5), 1.0)]
    assert threshold(dets) == dets


def test_identical_boxes_keep_highest():
    dets = [Detection("chair", (0, 0, 10, 10), 0.8), Detection("chair", (0, 0, 10, 10), 0.9)]
    assert nms(dets) == [dets[1]]


def test_disjoint_boxes_all_kept():
    dets = [Detection("chair", (20 * k, 0, 20 * k + 10, 10), 0.7) for k in range(5)]
    assert set(nms(dets)) == set(dets)


def test_nms_is_per_category():
    dets = [Detection("chair", (0, 0, 10, 10), 0.8), Detection("table", (0, 0, 10, 10), 0.9)]
    assert set(nms(dets)) == set(dets)


def test_nms_matches_brute_force(rng):
    for _ in range(40):
        dets = random_dets(rng, 50)
        assert nms(dets, 0.3) == brute_force_nms(dets, 0.3)


def test_nms_idempotent_and_order_invariant(rng):
    dets = random_dets(rng, 50)
    once = nms(dets)
    assert nms(once) == once
    for _ in range(5):
        perm = [dets[i] for i in rng.permutation(len(dets))]
        assert nms(perm) == once


def test_kept_boxes_do_not_overlap(rng):
    kept = nms(random_dets(rng, 60), 0.3)
    for i, a in enumerate(kept):
        for b in kept[i + 1 :]:
            if a.category == b.category:
                assert iou(a.bbox, b.bbox) <= 0.3


def test_kept_set_shrinks_with_threshold(rng):
    dets = random_dets(rng, 50)
    sizes = [len(nms(dets, t)) for t in (0.9, 0.6, 0.3, 0.1)]
    assert sizes == sorted(sizes, reverse=True)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(1, 50), st.floats(1, 50), st.floats(0, 1)), max_size=25))
def test_nms_brute_force_property(rows):
    dets = [Detection("sofa", (x, y, x + w, y + h), s) for x, y, w, h, s in rows]
    assert nms(dets, 0.4) == brute_force_nms(dets, 0.4)


def test_detection_validation():
    with pytest.raises(DetectionError) as e:
        Detection("lamp", (0, 0, 1, 1), 0.5)
    assert e.value.code == "unknown-category"
    with pytest.raises(DetectionError):
        Detection("chair", (5, 0, 1, 1), 0.5)
    with pytest.raises(DetectionError):
        Detection("chair", (0, 0, 1, 1), 1.5)
    with pytest.raises(DetectionError):
        nms([], 1.0)


def test_file_round_trip(tmp_path, rng):
    dets = random_dets(rng, 7, cats=("night table", "window", "chest"))
    save_detections(dets, tmp_path / "d.json")
    assert load_detections(tmp_path / "d.json") == dets


def test_file_rejects_unknown_category(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps([{"category": "lamp", "bbox": [0, 0, 1, 1], "score": 0.9}]))
    with pytest.raises(DetectionError):
        load_detections(p)
    p.write_text("{not json")
    with pytest.raises(DetectionError):
        load_detections(p)
    p.write_text(json.dumps({"detections": [{"category": "chair", "bbox": [0, 0, 1, 1]}]}))
    with pytest.raises(DetectionError):
        load_detections(p)
