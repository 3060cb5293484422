"""CAD model library: OBJ loading, unit-cube normalization, the 32-view
orthographic grid, crop descriptors and cosine retrieval.

Azimuth convention: at azimuth ``a`` the viewer looks along the model-frame
horizontal direction ``(sin a, cos a)``, so azimuth 0 looks at the model's
front (its -y face) and azimuth increases clockwise seen from above.  The
elevation is the angle the viewer looks down by.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CadError
from .features import descriptor
from .render import Raster, _fill
from .scene import CATEGORIES

AZIMUTHS = tuple(22.5 * k for k in range(16))
ELEVATIONS = (15.0, 30.0)
VIEW_SIZE = 128
VIEW_SPAN = 1.9  # model units covered by the canvas; the cube diagonal is sqrt(3)
MODEL_GRAY = 200.0
LIGHT_CAM = np.array([-0.4, -0.6, -1.0]) / np.linalg.norm([-0.4, -0.6, -1.0])

DATA_DIR = Path(__file__).parent / "data" / "models"


@dataclass
class CadModel:
    id: str
    category: str
    triangles: np.ndarray  # (T, 3, 3), normalized to the unit cube

    def __post_init__(self):
        self.triangles = np.asarray(self.triangles, dtype=float).reshape(-1, 3, 3)


def normalize(triangles) -> np.ndarray:
    """Translate and scale each axis so the bounding box becomes [0,1]^3."""
    tri = np.asarray(triangles, dtype=float).reshape(-1, 3, 3)
    if len(tri) == 0:
        raise CadError("degenerate-mesh", "mesh has no triangles")
    pts = tri.reshape(-1, 3)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    ext = hi - lo
    if np.any(ext <= 0):
        raise CadError("degenerate-mesh", f"zero extent along axis {int(np.argmin(ext))}")
    out = (tri - lo) / ext
    # snap the extreme coordinates so the bbox is exact despite rounding
    out = np.where(np.isclose(out, 1.0, atol=1e-12), 1.0, out)
    return np.where(np.isclose(out, 0.0, atol=1e-12), 0.0, out)


def make_model(model_id: str, category: str, triangles) -> CadModel:
    if category not in CATEGORIES:
        raise CadError("unknown-category", repr(category))
    return CadModel(model_id, category, normalize(triangles))


# ----------------------------------------------------------------------------
# OBJ subset


def parse_obj(text: str) -> tuple[np.ndarray, list, dict]:
    """Parse ``v`` and ``f`` records; faces with more than 3 vertices are
    fan-triangulated.  ``# key: value`` comment lines become metadata."""
    verts, faces, meta = [], [], {}
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "#" and len(parts) > 1 and parts[1].endswith(":"):
            meta[parts[1][:-1]] = " ".join(parts[2:])
        elif parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    v = np.array(verts, dtype=float).reshape(-1, 3)
    if faces and (min(min(f) for f in faces) < 0 or max(max(f) for f in faces) >= len(v)):
        raise CadError("bad-obj", "face index out of range")
    return v, faces, meta


def load_obj(path, model_id=None, category=None) -> CadModel:
    path = Path(path)
    v, faces, meta = parse_obj(path.read_text())
    if not faces:
        raise CadError("degenerate-mesh", f"{path} has no faces")
    category = category or meta.get("category") or path.stem.rsplit("_", 1)[0].replace("_", " ")
    return make_model(model_id or path.stem, category, v[np.array(faces)])


def save_obj(model: CadModel, path) -> None:
    lines = [f"# category: {model.category}"]
    for tri in model.triangles:
        for p in tri:
            lines.append("v {:.6f} {:.6f} {:.6f}".format(*p))
    for t in range(len(model.triangles)):
        lines.append(f"f {3 * t + 1} {3 * t + 2} {3 * t + 3}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_library(directory=None) -> dict:
    """All ``*.obj`` models in a directory, keyed by id (the file stem)."""
    directory = Path(directory) if directory is not None else DATA_DIR
    models = {}
    for p in sorted(directory.glob("*.obj")):
        m = load_obj(p)
        models[m.id] = m
    if not models:
        raise CadError("no-models", f"no .obj files in {directory}")
    return models


# ----------------------------------------------------------------------------
# orthographic views


def view_basis(azimuth_deg: float, elevation_deg: float):
    """(right, down, forward) unit vectors of the viewer, in model coordinates."""
    a, e = np.radians(azimuth_deg), np.radians(elevation_deg)
    fwd = np.array([np.sin(a) * np.cos(e), np.cos(a) * np.cos(e), -np.sin(e)])
    right = np.array([np.cos(a), -np.sin(a), 0.0])
    down = np.cross(fwd, right)
    return right, down, fwd


def view_plane_coords(points, azimuth_deg, elevation_deg) -> np.ndarray:
    """Orthographic (u, v) of model points, origin at the cube center, v down."""
    r, d, _ = view_basis(azimuth_deg, elevation_deg)
    p = np.asarray(points, dtype=float) - 0.5
    return np.stack([p @ r, p @ d], axis=-1)


@dataclass
class RenderedView:
    image: np.ndarray  # (h, w) uint8, tightly cropped
    mask: np.ndarray  # (h, w) bool silhouette
    box: tuple  # silhouette bbox (u0, v0, u1, v1) in view-plane units


def render_view(model: CadModel, azimuth_deg: float, elevation_deg: float, size: int = VIEW_SIZE) -> RenderedView:
    """Flat-shaded orthographic rendering, light fixed relative to the viewer."""
    r, d, f = view_basis(azimuth_deg, elevation_deg)
    tri = model.triangles - 0.5
    scale = size / VIEW_SPAN
    uv = np.stack([tri @ r, tri @ d], axis=-1) * scale + size / 2.0
    depth = tri @ f
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    nn = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, nn, out=np.zeros_like(n), where=nn > 0)
    n *= np.where(n @ f > 0, -1.0, 1.0)[:, None]
    light = LIGHT_CAM[0] * r + LIGHT_CAM[1] * d + LIGHT_CAM[2] * f
    gray = np.round(MODEL_GRAY * (0.6 + 0.4 * np.maximum(0.0, n @ light)))

    canvas = Raster(
        np.zeros((size, size, 3), dtype=np.uint8),
        np.full((size, size), np.inf, dtype=np.float32),
        np.full((size, size), -1, dtype=np.int32),
    )
    zbuf = np.full((size, size), np.inf)
    # orthographic depth is affine in screen space; feed an increasing
    # affine "inverse depth" so nearer surfaces still win
    for t in range(len(tri)):
        _fill(canvas, zbuf, uv[t], 10.0 - depth[t], gray[t], 0)
    mask = canvas.owner >= 0
    if not mask.any():
        raise CadError("empty-view", f"{model.id} at ({azimuth_deg}, {elevation_deg}) renders nothing")
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    box = ((c0 - size / 2) / scale, (r0 - size / 2) / scale, (c1 - size / 2) / scale, (r1 - size / 2) / scale)
    return RenderedView(canvas.rgb[r0:r1, c0:c1, 0].copy(), mask[r0:r1, c0:c1].copy(), box)


@dataclass
class ViewEntry:
    model_id: str
    category: str
    azimuth: float
    elevation: float
    descriptor: np.ndarray
    silhouette: np.ndarray
    box: tuple = (0.0, 0.0, 0.0, 0.0)

    @property
    def key(self):
        return (self.model_id, self.azimuth, self.elevation)


def build_view_grid(model: CadModel, size: int = VIEW_SIZE) -> list:
    """The 32 views (16 azimuths x 2 elevations) of one model."""
    out = []
    for el in ELEVATIONS:
        for az in AZIMUTHS:
            v = render_view(model, az, el, size)
            out.append(ViewEntry(model.id, model.category, az, el, descriptor(v.image), v.mask, v.box))
    return out


@dataclass
class ViewDatabase:
    entries: list = field(default_factory=list)

    @classmethod
    def build(cls, models) -> "ViewDatabase":
        items = models.values() if isinstance(models, dict) else models
        entries = []
        for m in sorted(items, key=lambda m: m.id):
            entries.extend(build_view_grid(m))
        return cls(entries)

    def categories(self) -> set:
        return {e.category for e in self.entries}

    def of_category(self, category) -> list:
        return [e for e in self.entries if e.category == category]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        by_model = {}
        for e in self.entries:
            by_model.setdefault(e.model_id, []).append(e)
        for mid, entries in sorted(by_model.items()):
            write_view_cache(directory / f"{mid}.vgc", entries)

    @classmethod
    def load(cls, directory) -> "ViewDatabase":
        entries = []
        for p in sorted(Path(directory).glob("*.vgc")):
            entries.extend(read_view_cache(p))
        if not entries:
            raise CadError("no-models", f"no view-grid cache files in {directory}")
        return cls(entries)


def retrieve(crop, category: str, db: ViewDatabase) -> list:
    """All views of ``category`` ranked by cosine similarity to the crop.

    Returns ``[(ViewEntry, similarity), ...]``, best first; ties go to the
    smallest (model_id, azimuth, elevation).
    """
    cands = db.of_category(category)
    if not cands:
        raise CadError("no-models", f"no models of category {category!r}")
    q = descriptor(crop)
    D = np.stack([e.descriptor for e in cands])
    sims = D @ q
    order = sorted(range(len(cands)), key=lambda i: (-sims[i], cands[i].key))
    return [(cands[i], float(sims[i])) for i in order]


# ----------------------------------------------------------------------------
# view-grid cache files
#
# header: b"RCVG", u32 version, u32 entry count, u32 descriptor length
# entry:  u16 len + utf-8 model id, u16 len + utf-8 category,
#         f32 azimuth, f32 elevation, 4 x f64 box, desc_len x f32,
#         u16 height, u16 width, packed silhouette bits (row-major)

CACHE_MAGIC = b"RCVG"
CACHE_VERSION = 1


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<H", len(b)) + b


def write_view_cache(path, entries) -> None:
    if not entries:
        raise CadError("empty-cache", "nothing to write")
    n = len(entries[0].descriptor)
    chunks = [CACHE_MAGIC, struct.pack("<III", CACHE_VERSION, len(entries), n)]
    for e in entries:
        if len(e.descriptor) != n:
            raise CadError("bad-cache", "descriptor lengths differ within one cache")
        h, w = e.silhouette.shape
        chunks += [
            _pack_str(e.model_id),
            _pack_str(e.category),
            struct.pack("<ff", e.azimuth, e.elevation),
            struct.pack("<4d", *e.box),
            np.asarray(e.descriptor, dtype="<f4").tobytes(),
            struct.pack("<HH", h, w),
            np.packbits(e.silhouette.astype(np.uint8).ravel()).tobytes(),
        ]
    Path(path).write_bytes(b"".join(chunks))


def read_view_cache(path) -> list:
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise CadError("bad-cache", f"{path}: wrong magic")
    version, count, n = struct.unpack_from("<III", data, 4)
    if version != CACHE_VERSION:
        raise CadError("bad-cache", f"{path}: unsupported version {version}")
    off = 16
    out = []

    def take_str():
        nonlocal off
        (k,) = struct.unpack_from("<H", data, off)
        s = data[off + 2 : off + 2 + k].decode("utf-8")
        off += 2 + k
        return s

    try:
        for _ in range(count):
            mid, cat = take_str(), take_str()
            az, el = struct.unpack_from("<ff", data, off)
            box = struct.unpack_from("<4d", data, off + 8)
            off += 40
            desc = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(float)
            off += 4 * n
            h, w = struct.unpack_from("<HH", data, off)
            off += 4
            nbytes = (h * w + 7) // 8
            bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=nbytes, offset=off))
            off += nbytes
            sil = bits[: h * w].reshape(h, w).astype(bool)
            out.append(ViewEntry(mid, cat, float(az), float(el), desc / np.linalg.norm(desc), sil, box))
    except (struct.error, ValueError) as exc:
        raise CadError("bad-cache", f"{path}: truncated ({exc})") from exc
    return out
