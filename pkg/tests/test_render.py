import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomcad.errors import RenderError
from roomcad.geometry import Camera, look_rotation
from roomcad.render import (
    BACKGROUND,
    OBJECT_BASE,
    Triangles,
    assign_colors,
    blank_raster,
    draw,
    medoid_color,
    object_masks,
    quad_triangles,
    rasterize,
    render_room,
    unit_box_triangles,
)
from roomcad.scene import RoomBox, Scene, SceneObject

# camera at the origin looking along +y: camera x = world x, camera y = -world z
CAM = Camera(200.0, (80.0, 60.0), look_rotation(0.0, 0.0), (0, 0, 0), (160, 120))


def facing_quad(x0, z0, x1, z1, y):
    return quad_triangles([(x0, y, z0), (x1, y, z0), (x1, y, z1), (x0, y, z1)])


def soup(*parts):
    tris = [Triangles(q, np.tile(c, (len(q), 1)).astype(float), np.full(len(q), o)) for q, c, o in parts]
    return Triangles.concat(tris)


def test_nearer_surface_wins_in_any_order():
    near = (facing_quad(-0.5, -0.5, 0.5, 0.5, 2.0), (255, 0, 0), 1)
    far = (facing_quad(-1.0, -1.0, 0.2, 0.2, 3.0), (0, 255, 0), 2)
    results = []
    for order in (near, far), (far, near):
        r = blank_raster(CAM)
        draw(r, soup(*order), CAM)
        results.append(r)
    a, b = results
    assert np.array_equal(a.owner, b.owner) and np.array_equal(a.rgb, b.rgb)
    assert a.owner[60, 80] == 1
    assert np.isclose(a.depth[60, 80], 2.0)
    # only the far quad reaches the lower-left region
    assert a.owner[115, 20] == 2
    assert np.isclose(a.depth[115, 20], 3.0)
    assert set(np.unique(a.owner)) == {BACKGROUND, 1, 2}


def test_square_side_is_focal_times_size_over_depth():
    s, d = 0.6, 3.0
    r = blank_raster(CAM)
    draw(r, soup((facing_quad(-s / 2, -s / 2, s / 2, s / 2, d), (200, 200, 200), 7)), CAM)
    rows, cols = np.nonzero(r.owner == 7)
    side = CAM.focal * s / d
    assert cols.max() - cols.min() + 1 == pytest.approx(side, abs=1)
    assert rows.max() - rows.min() + 1 == pytest.approx(side, abs=1)
    assert len(rows) == pytest.approx(side * side, rel=0.05)


def test_near_plane_clipping():
    # a floor quad running from behind the camera to far ahead
    tri = quad_triangles([(-2, -2, -1), (2, -2, -1), (2, 8, -1), (-2, 8, -1)])
    r = blank_raster(CAM)
    draw(r, soup((tri, (100, 100, 100), 3)), CAM)
    assert (r.owner == 3).sum() > 0
    assert np.all(r.owner[:60] == BACKGROUND)  # nothing drawn above the horizon
    assert np.all(r.owner[-1] == 3)


ROOM = RoomBox([-2.0, -1.0, 0.0], 4.5, 5.5, 2.7)


def room_camera():
    return Camera(150.0, (80.0, 60.0), look_rotation(0.4, -0.2, 0.05), (0.3, 0.5, 1.5), (160, 120))


def test_room_depth_matches_ray_cast():
    cam = room_camera()
    r = render_room(Scene(ROOM), cam)
    w, h = cam.image_size
    cols, rows = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    d_cam = np.stack([(cols - 80.0) / cam.focal, (rows - 60.0) / cam.focal, np.ones_like(cols)], axis=-1)
    d = d_cam @ cam.rotation  # world direction with unit camera-z
    lo, hi = ROOM.lo, ROOM.hi
    best = np.full((h, w), np.inf)
    for axis in range(3):
        for bound in (lo[axis], hi[axis]):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (bound - cam.center[axis]) / d[..., axis]
            t = np.where(t > 0, t, np.inf)
            best = np.minimum(best, t)
    assert np.all(np.isfinite(r.depth))
    assert np.allclose(r.depth, best, rtol=1e-5)


def test_render_deterministic(fixture):
    a = rasterize(fixture.scene, fixture.camera, fixture.models)
    b = rasterize(fixture.scene, fixture.camera, fixture.models)
    assert a.rgb.tobytes() == b.rgb.tobytes()
    assert a.owner.tobytes() == b.owner.tobytes()


def test_incremental_render_matches_full(fixture):
    base = render_room(fixture.scene, fixture.camera)
    full = rasterize(fixture.scene, fixture.camera, fixture.models)
    inc = rasterize(fixture.scene, fixture.camera, fixture.models, base=base)
    assert np.array_equal(full.rgb, inc.rgb) and np.array_equal(full.owner, inc.owner)


def test_object_order_does_not_change_pixels(fixture):
    scene = fixture.scene
    rev = Scene(scene.room, scene.objects[::-1], scene.windows)
    a = rasterize(scene, fixture.camera, fixture.models)
    b = rasterize(rev, fixture.camera, fixture.models)
    assert np.array_equal(a.rgb, b.rgb)


def test_unknown_model():
    scene = Scene(ROOM, [SceneObject("nope", "chair", (0, 2, 0), (1, 1, 1), 0.0)])
    with pytest.raises(RenderError) as e:
        rasterize(scene, room_camera())
    assert e.value.code == "unknown-model"


def test_unit_box_closed():
    t = unit_box_triangles()
    assert t.shape == (12, 3, 3)
    n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
    assert np.allclose(np.abs(n).sum(axis=1), 1.0)  # unit-area-doubled faces


# ---------------------------------------------------------------------------
# medoid


def test_medoid_examples():
    img = np.array([[[0, 0, 0], [2, 2, 2]]], dtype=np.uint8)
    assert medoid_color(img, np.ones((1, 2), bool)) == (0, 0, 0)
    img = np.array([[[10, 10, 10], [12, 12, 12], [200, 0, 0]]], dtype=np.uint8)
    assert medoid_color(img, np.ones((1, 3), bool)) in {(10, 10, 10), (12, 12, 12)}
    mask = np.array([[False, False, True]])
    assert medoid_color(img, mask) == (200, 0, 0)
    with pytest.raises(RenderError):
        medoid_color(img, np.zeros((1, 3), bool))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(*[st.integers(0, 255)] * 3), min_size=1, max_size=12))
def test_medoid_matches_brute_force(colors):
    img = np.array([colors], dtype=np.uint8)
    got = medoid_color(img, np.ones((1, len(colors)), bool))
    med = np.median(np.array(colors, float), axis=0)
    dist = {c: sum((a - b) ** 2 for a, b in zip(c, med)) for c in colors}
    best = min(dist.values())
    want = min(c for c, v in dist.items() if v == best)
    assert got == want
    assert got in colors


def test_masks_follow_occlusion():
    cam = room_camera()
    front = SceneObject("box", "chest", (0.9, 2.3, 0), (0.6, 0.6, 0.6), 0.0)
    back = SceneObject("box", "chest", (1.0, 3.3, 0), (0.6, 0.6, 0.9), 0.0)
    scene = Scene(ROOM, [front, back])
    alone = object_masks(Scene(ROOM, [back]), cam)["objects"][0]
    both = object_masks(scene, cam)["objects"]
    assert both[0].any() and both[1].any()
    assert not (both[0] & both[1]).any()
    assert np.array_equal(both[1], alone & ~both[0])


def test_mask_area_against_supersampled_reference():
    cam = room_camera()
    obj = SceneObject("box", "chest", (0.9, 2.8, 0), (0.8, 0.5, 0.7), 0.3)
    mask = object_masks(Scene(ROOM, [obj]), cam)["objects"][0]
    big = Camera(cam.focal * 4, np.asarray(cam.principal_point) * 4, cam.rotation, cam.center, (640, 480))
    ref = rasterize(Scene(ROOM, [obj]), big).owner == OBJECT_BASE
    assert mask.sum() == pytest.approx(ref.sum() / 16, rel=0.03)


def test_surface_masks_exclude_boxes():
    cam = room_camera()
    masks = object_masks(Scene(ROOM), cam, boxes=[(10, 10, 50, 40)])["surfaces"]
    assert not any(m[10:40, 10:50].any() for m in masks.values())
    total = sum(m.sum() for m in masks.values())
    assert total == 160 * 120 - 40 * 30


def test_assign_colors_recovers_flat_colors():
    cam = room_camera()
    obj = SceneObject("box", "chest", (0.9, 2.8, 0), (0.8, 0.5, 0.7), 0.0, (30, 60, 90))
    scene = Scene(ROOM, [obj])
    r = rasterize(scene, cam)
    got = assign_colors(scene, r.rgb, cam)
    # every assigned colour is a colour the renderer actually drew there
    m = r.owner == OBJECT_BASE
    assert got.objects[0].color in {tuple(c) for c in r.rgb[m]}
    for k, name in enumerate(("ceiling", "floor", "left", "middle", "right")):
        sm = r.owner == k
        if sm.any():
            assert got.appearance.surfaces[name] in {tuple(c) for c in r.rgb[sm]}
