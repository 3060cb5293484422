"""Procedural furniture meshes for the bundled model library.

Each model is a union of axis-aligned boxes in a local frame whose front
faces -y.  Every design carries at least one feature that breaks rotational
symmetry about the vertical axis (a backrest, a drawer front, a headboard),
so no two azimuths of a model render identically.

``write_library(dir)`` regenerates the OBJ files shipped in
``roomcad/data/models``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cadlib import make_model, save_obj
from .render import quad_triangles


def box(x0, y0, z0, x1, y1, z1) -> np.ndarray:
    c = np.array(
        [[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0], [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]],
        dtype=float,
    )
    faces = [(0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)]
    return np.concatenate([quad_triangles(c[list(f)]) for f in faces])


def legs(w, d, h, t, inset=0.0):
    i = inset
    return [
        box(i, i, 0, i + t, i + t, h),
        box(w - i - t, i, 0, w - i, i + t, h),
        box(i, d - i - t, 0, i + t, d - i, h),
        box(w - i - t, d - i - t, 0, w - i, d - i, h),
    ]


def chair(variant: int):
    w, d = 0.45, 0.45 + 0.03 * variant
    seat = 0.42 + 0.02 * (variant % 2)
    t = 0.035 + 0.01 * (variant % 3)
    parts = legs(w, d, seat, t)
    parts.append(box(0, 0, seat, w, d, seat + 0.05))
    back_top = seat + 0.45 + 0.08 * variant
    if variant == 2:
        # slatted back
        for k in range(3):
            x = 0.05 + k * (w - 0.13) / 2
            parts.append(box(x, d - 0.04, seat + 0.05, x + 0.03, d, back_top))
        parts.append(box(0, d - 0.05, back_top - 0.08, w, d, back_top))
    else:
        parts.append(box(0, d - 0.06, seat + 0.05, w, d, back_top))
    if variant == 3:
        # one armrest only
        parts.append(box(0, 0.05, seat + 0.2, 0.05, d - 0.06, seat + 0.24))
        parts.append(box(0, 0.05, seat + 0.05, 0.05, 0.09, seat + 0.2))
    if variant == 1:
        parts.append(box(0.02, 0.1, 0.12, w - 0.02, 0.13, 0.15))  # front stretcher
    return parts


def table(variant: int):
    w, d, h = [(1.2, 0.7, 0.75), (1.6, 0.9, 0.74), (0.9, 0.9, 0.72), (1.4, 0.6, 0.76)][variant]
    top = 0.04
    t = 0.06
    parts = legs(w, d, h - top, t, inset=0.03)
    parts.append(box(0, 0, h - top, w, d, h))
    if variant == 0:
        parts.append(box(0.2, 0.02, h - top - 0.1, 0.6, 0.06, h - top))  # drawer front
    elif variant == 1:
        parts.append(box(0.09, d - 0.12, 0.1, w - 0.09, d - 0.08, 0.16))  # back stretcher
    elif variant == 2:
        parts.append(box(0.09, 0.09, 0.2, w - 0.09, d * 0.6, 0.23))  # partial shelf
    else:
        parts = [box(0, 0, h - top, w, d, h), box(0.02, 0.02, 0, 0.45, d - 0.02, h - top)]  # desk pedestal
        parts += [box(w - 0.06, 0.02, 0, w - 0.02, 0.06, h - top), box(w - 0.06, d - 0.06, 0, w - 0.02, d - 0.02, h - top)]
        parts.append(box(0.07, 0.0, 0.45, 0.4, 0.02, 0.6))
    return parts


def sofa(variant: int):
    w = [2.0, 1.6, 2.2, 1.8][variant]
    d, seat = 0.9, 0.42
    parts = [box(0, 0, 0.08, w, d, seat)]
    parts += [box(0.05, 0.05, 0, 0.12, 0.12, 0.08), box(w - 0.12, 0.05, w * 0 + 0, w - 0.05, 0.12, 0.08)]
    parts += [box(0.05, d - 0.12, 0, 0.12, d - 0.05, 0.08), box(w - 0.12, d - 0.12, 0, w - 0.05, d - 0.05, 0.08)]
    parts.append(box(0, d - 0.22, seat, w, d, 0.85 + 0.05 * variant))
    arm_h = 0.62
    if variant != 2:
        parts.append(box(0, 0, seat, 0.18, d - 0.22, arm_h))
    if variant not in (1,):
        parts.append(box(w - 0.18, 0, seat, w, d - 0.22, arm_h))
    if variant == 3:
        for k in range(3):
            x0 = 0.2 + k * (w - 0.4) / 3
            parts.append(box(x0 + 0.02, 0.05, seat, x0 + (w - 0.4) / 3 - 0.02, d - 0.25, seat + 0.08))
    return parts


def bookshelf(variant: int):
    w, d, h = [(0.9, 0.35, 1.8), (0.8, 0.3, 1.2), (1.2, 0.4, 2.0), (0.6, 0.3, 1.9)][variant]
    t = 0.025
    n = [4, 2, 5, 5][variant]
    base = 0.0
    parts = []
    if variant == 0:
        # plinth set back from the front
        parts.append(box(t, 0.04, 0, w - t, d, 0.08))
        base = 0.08
    elif variant == 1:
        parts += legs(w, d, 0.12, 0.04)
        base = 0.12
    if variant == 3:
        # stepped profile: the upper half is shallower than the lower half
        parts += [box(0, 0, 0, t, d, h / 2), box(w - t, 0, 0, w, d, h / 2)]
        parts += [box(0, 0.4 * d, h / 2, t, d, h), box(w - t, 0.4 * d, h / 2, w, d, h)]
    else:
        parts += [box(0, 0, base, t, d, h), box(w - t, 0, base, w, d, h)]
    if variant != 3:
        parts.append(box(t, d - t, base, w - t, d, h - (0.1 if variant == 2 else 0.0)))
    else:
        parts.append(box(t, d - t, h * 0.5, w - t, d, h * 0.55))  # single back rail
    if variant == 2:
        parts.append(box(-0.04, -0.04, h, w + 0.04, d, h + 0.05))  # overhanging crown
    elif variant == 1:
        parts.append(box(0, -0.04, h - t, w, d, h))  # top overhangs the front only
    else:
        parts.append(box(0, 0.4 * d if variant == 3 else 0, h - t, w, d, h))
    for k in range(n):
        z = base + k * (h - t - base) / n
        y0 = 0.4 * d if variant == 3 and z >= h / 2 else 0
        parts.append(box(t, y0, z, w - t, d - t, z + t))
    return parts


def bed(variant: int):
    w, d = [(1.6, 2.1), (1.0, 2.0), (1.8, 2.1), (1.4, 2.0)][variant]
    frame = 0.3 + 0.05 * (variant % 2)
    parts = [box(0, 0, 0.05, w, d - 0.08, frame), box(0.03, 0.03, frame, w - 0.03, d - 0.1, frame + 0.2)]
    parts += legs(w, d - 0.08, 0.05, 0.08)
    top = frame + 0.6 + 0.1 * variant
    if variant == 0:
        # panel headboard between two taller posts, low footboard
        parts += [box(0, d - 0.08, 0, 0.08, d, top + 0.15), box(w - 0.08, d - 0.08, 0, w, d, top + 0.15)]
        parts.append(box(0.08, d - 0.06, frame, w - 0.08, d - 0.02, top))
        parts.append(box(0, -0.06, 0, w, 0.0, frame + 0.15))
    elif variant == 1:
        parts.append(box(0, d - 0.08, 0, w, d, top))
    elif variant == 2:
        # stepped headboard, raised in the middle
        parts.append(box(0, d - 0.08, 0, w, d, top - 0.25))
        parts.append(box(w * 0.3, d - 0.08, top - 0.25, w * 0.7, d, top))
        parts.append(box(0, -0.06, 0, 0.06, 0.0, frame + 0.3))
        parts.append(box(w - 0.06, -0.06, 0, w, 0.0, frame + 0.3))
    else:
        # headboard hung above the floor on two legs, one pillow
        parts.append(box(0, d - 0.08, frame - 0.1, w, d, top))
        parts += [box(0.1, d - 0.06, 0, 0.16, d, frame - 0.1), box(w - 0.16, d - 0.06, 0, w - 0.1, d, frame - 0.1)]
        parts.append(box(0.1, d - 0.5, frame + 0.2, w / 2 - 0.05, d - 0.15, frame + 0.3))
    return parts


def night_table(variant: int):
    w, d, h = [(0.45, 0.4, 0.55), (0.5, 0.4, 0.6), (0.4, 0.35, 0.5), (0.55, 0.45, 0.65)][variant]
    parts = [box(0, 0.02, 0.1, w, d, h)]
    parts += legs(w, d, 0.1, 0.04)
    n = 1 + variant % 3
    for k in range(n):
        z0 = 0.12 + k * (h - 0.14) / n
        z1 = z0 + (h - 0.14) / n - 0.02
        parts.append(box(0.03, 0.0, z0, w - 0.03, 0.02, z1))
        parts.append(box(w / 2 - 0.04, -0.03, (z0 + z1) / 2 - 0.01, w / 2 + 0.04, 0.0, (z0 + z1) / 2 + 0.01))
    if variant == 3:
        parts.append(box(0, d - 0.04, h, w, d, h + 0.08))  # back lip
    return parts


def chest(variant: int):
    w, d, h = [(1.0, 0.5, 0.9), (0.8, 0.45, 1.1), (1.2, 0.5, 0.8), (0.9, 0.55, 1.2)][variant]
    parts = [box(0, 0.02, 0.08, w, d, h), box(-0.02, 0.0, h, w + 0.02, d + 0.02, h + 0.03)]
    parts += legs(w, d, 0.08, 0.05)
    rows = [3, 4, 2, 5][variant]
    cols = 2 if variant == 2 else 1
    for r in range(rows):
        z0 = 0.1 + r * (h - 0.12) / rows
        z1 = z0 + (h - 0.12) / rows - 0.02
        for c in range(cols):
            x0 = 0.02 + c * (w - 0.04) / cols
            x1 = x0 + (w - 0.04) / cols - 0.02
            parts.append(box(x0, 0.0, z0, x1, 0.02, z1))
            hx = (x0 + x1) / 2
            parts.append(box(hx - 0.05, -0.025, (z0 + z1) / 2 - 0.01, hx + 0.05, 0.0, (z0 + z1) / 2 + 0.01))
    return parts


DESIGNS = {
    "chair": chair,
    "table": table,
    "sofa": sofa,
    "bookshelf": bookshelf,
    "bed": bed,
    "night table": night_table,
    "chest": chest,
}
VARIANTS = 4


def library_models() -> dict:
    out = {}
    for cat, fn in DESIGNS.items():
        for v in range(VARIANTS):
            mid = f"{cat.replace(' ', '_')}_{v}"
            out[mid] = make_model(mid, cat, np.concatenate(fn(v)))
    return out


def write_library(directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for mid, m in sorted(library_models().items()):
        p = directory / f"{mid}.obj"
        save_obj(m, p)
        paths.append(p)
    return paths
