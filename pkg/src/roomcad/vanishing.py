"""Line segments, Manhattan vanishing points and camera calibration."""

from __future__ import annotations

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import CalibrationError, RoomCadError
from .geometry import HOMOGENEOUS_EPS, Camera, nearest_rotation

logger = logging.getLogger(__name__)

INLIER_ANGLE_DEG = 3.0
ORTHOGONALITY_TOL_DEG = 2.0


class VanishingError(RoomCadError):
    pass


@dataclass(frozen=True)
class LineSegment:
    p1: np.ndarray
    p2: np.ndarray
    strength: float

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.p1 + self.p2)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p2 - self.p1))

    @property
    def direction(self) -> np.ndarray:
        d = self.p2 - self.p1
        return d / np.linalg.norm(d)

    @property
    def orientation_deg(self) -> float:
        """Undirected orientation in [0, 180); 90 is vertical in the image."""
        d = self.p2 - self.p1
        return float(np.degrees(np.arctan2(d[1], d[0])) % 180.0)


@dataclass
class VanishingTriple:
    """Three vanishing points as unit homogeneous pixel vectors.

    ``vp_z`` is the vertical direction, ``vp_y`` the horizontal direction the
    camera faces most directly and ``vp_x`` the remaining horizontal one.
    ``inliers`` holds, per vanishing point, indices into ``segments``.
    """

    vp_x: np.ndarray
    vp_y: np.ndarray
    vp_z: np.ndarray
    inliers: tuple = ((), (), ())
    segments: list = field(default_factory=list)

    @property
    def points(self):
        return (self.vp_x, self.vp_y, self.vp_z)

    def inlier_segments(self, axis: int) -> list:
        return [self.segments[i] for i in self.inliers[axis]]


# ----------------------------------------------------------------------------
# segment extraction


def extract_segments(
    image,
    grad_threshold: float = 0.05,
    angle_tolerance_deg: float = 22.5,
    min_length: float | None = None,
    max_width: float = 2.0,
    smoothing: float = 1.0,
) -> list[LineSegment]:
    """Detect straight edge segments in a grayscale image.

    Pixels whose gradient magnitude exceeds ``grad_threshold`` times the
    image's intensity range are grown into regions of coherent level-line
    orientation; every region long and thin enough is fitted with a line by
    weighted PCA.  Returns segments sorted by strength, strongest first.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., :3] @ np.array([0.299, 0.587, 0.114])
    h, w = img.shape
    if h < 32 or w < 32:
        raise VanishingError("image-too-small", f"{w}x{h} is below 32x32")
    rng = float(img.max() - img.min())
    if rng == 0:
        return []
    if min_length is None:
        min_length = 0.02 * max(w, h)
    sm = ndimage.gaussian_filter(img, smoothing) if smoothing > 0 else img
    gx = ndimage.sobel(sm, axis=1) / 8.0
    gy = ndimage.sobel(sm, axis=0) / 8.0
    mag = np.hypot(gx, gy)
    strong = mag > grad_threshold * rng
    # level-line orientation, doubled to make it undirected
    theta = np.arctan2(gy, gx) + np.pi / 2
    c2, s2 = np.cos(2 * theta), np.sin(2 * theta)
    cos_tol2 = np.cos(2 * np.radians(angle_tolerance_deg))

    used = ~strong
    rows, cols = np.nonzero(strong)
    order = np.lexsort((cols, rows, -mag[rows, cols]))
    neigh = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    segments = []
    for idx in order:
        r0, c0 = int(rows[idx]), int(cols[idx])
        if used[r0, c0]:
            continue
        used[r0, c0] = True
        region = [(r0, c0)]
        sx, sy = c2[r0, c0], s2[r0, c0]
        queue = deque(region)
        while queue:
            r, c = queue.popleft()
            for dr, dc in neigh:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and not used[rr, cc]:
                    norm = np.hypot(sx, sy)
                    if (c2[rr, cc] * sx + s2[rr, cc] * sy) >= cos_tol2 * norm:
                        used[rr, cc] = True
                        region.append((rr, cc))
                        queue.append((rr, cc))
                        sx += c2[rr, cc]
                        sy += s2[rr, cc]
        if len(region) < 2:
            continue
        seg = _fit_segment(np.array(region), mag, min_length, max_width)
        if seg is not None:
            segments.append(seg)
    segments.sort(key=lambda s: (-s.strength, s.p1[0], s.p1[1], s.p2[0], s.p2[1]))
    return segments


def _fit_segment(region, mag, min_length, max_width):
    rr, cc = region[:, 0], region[:, 1]
    wts = mag[rr, cc]
    pts = np.stack([cc + 0.5, rr + 0.5], axis=1)
    total = wts.sum()
    mean = (wts[:, None] * pts).sum(0) / total
    d = pts - mean
    cov = (wts[:, None, None] * d[:, :, None] * d[:, None, :]).sum(0) / total
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, 1]
    if np.sqrt(max(evals[0], 0.0)) > max_width:
        return None
    t = d @ direction
    t0, t1 = t.min(), t.max()
    if t1 - t0 < min_length:
        return None
    # canonical endpoint order: left to right, then top to bottom
    p1, p2 = mean + t0 * direction, mean + t1 * direction
    if (p2[0], p2[1]) < (p1[0], p1[1]):
        p1, p2 = p2, p1
    return LineSegment(p1, p2, float(total))


# ----------------------------------------------------------------------------
# vanishing points


def _conditioning(image_size):
    w, h = image_size
    s = float(max(w, h))
    T = np.array([[1 / s, 0.0, -0.5 * w / s], [0.0, 1 / s, -0.5 * h / s], [0.0, 0.0, 1.0]])
    return T, np.linalg.inv(T)


def _segment_arrays(segments, T):
    p1 = np.array([s.p1 for s in segments])
    p2 = np.array([s.p2 for s in segments])
    h1 = np.c_[p1, np.ones(len(p1))] @ T.T
    h2 = np.c_[p2, np.ones(len(p2))] @ T.T
    lines = np.cross(h1, h2)
    lines /= np.linalg.norm(lines[:, :2], axis=1, keepdims=True)
    mids = 0.5 * (h1[:, :2] + h2[:, :2])
    dirs = h2[:, :2] - h1[:, :2]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return lines, mids, dirs


def consistency_angles(vps, mids, dirs) -> np.ndarray:
    """Angle (degrees) between each segment and the direction to each VP.

    ``vps`` is (M, 3) homogeneous in the same frame as ``mids``; returns an
    (N, M) array.  A VP sitting on a segment's midpoint gets 90 degrees.
    """
    vps = np.atleast_2d(vps)
    ux = vps[None, :, 0] - vps[None, :, 2] * mids[:, 0:1]
    uy = vps[None, :, 1] - vps[None, :, 2] * mids[:, 1:2]
    un = np.hypot(ux, uy)
    dot = np.abs(ux * dirs[:, 0:1] + uy * dirs[:, 1:2])
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.where(un > 1e-12, dot / un, 0.0)
    return np.degrees(np.arccos(np.clip(cosang, 0.0, 1.0)))


def _refine_vp(lines, weights, v0):
    if len(lines) < 2:
        return v0
    M = (weights[:, None, None] * lines[:, :, None] * lines[:, None, :]).sum(0)
    _, evecs = np.linalg.eigh(M)
    v = evecs[:, 0]
    if v @ v0 < 0:
        v = -v
    return v


def _to_pixels(v_cond, T_inv):
    v = T_inv @ v_cond
    v = v / np.linalg.norm(v)
    # canonical sign: w >= 0, or for points at infinity the first nonzero >= 0
    if abs(v[2]) > HOMOGENEOUS_EPS:
        if v[2] < 0:
            v = -v
    else:
        v[2] = 0.0
        k = 0 if abs(v[0]) > 1e-12 else 1
        if v[k] < 0:
            v = -v
        v = v / np.linalg.norm(v)
    return v


def _verticality(v_cond):
    """How vertical the direction from the image center to the VP is."""
    d = v_cond[:2] if abs(v_cond[2]) <= HOMOGENEOUS_EPS else v_cond[:2] / v_cond[2]
    n = np.linalg.norm(d)
    return abs(d[1]) / n if n > 0 else 0.0


def _center_distance(v_cond):
    if abs(v_cond[2]) <= HOMOGENEOUS_EPS * np.linalg.norm(v_cond):
        return np.inf
    return float(np.linalg.norm(v_cond[:2] / v_cond[2]))


def _label_triple(vs):
    """Order three conditioned VPs as (x, y, z)."""
    vert = [_verticality(v) for v in vs]
    iz = int(np.argmax(vert))
    rest = [i for i in range(3) if i != iz]
    dist = [_center_distance(vs[i]) for i in rest]
    iy = rest[int(np.argmin(dist))] if dist[0] != dist[1] else rest[0]
    ix = rest[0] if iy == rest[1] else rest[1]
    return ix, iy, iz


def estimate_vanishing_points(
    segments,
    image_size,
    max_segments: int = 60,
    max_candidates: int = 40,
    inlier_angle_deg: float = INLIER_ANGLE_DEG,
    orthogonality_tol_deg: float = ORTHOGONALITY_TOL_DEG,
) -> VanishingTriple:
    """Pick the orthogonal VP triple with the largest total inlier strength.

    Candidates are the pairwise intersections of the strongest segments.
    Triples are scored by the summed strength of segments assigned to their
    closest VP (within ``inlier_angle_deg``) and accepted in score order once
    they admit a calibration whose back-projected directions are mutually
    orthogonal.  The winner is refined by weighted least squares over its
    inliers.
    """
    segments = list(segments)
    if len(segments) < 2:
        raise VanishingError("insufficient-structure", f"only {len(segments)} segments")
    canon = sorted(
        range(len(segments)),
        key=lambda i: (-segments[i].strength, *segments[i].p1, *segments[i].p2),
    )
    segs = [segments[i] for i in canon]
    T, T_inv = _conditioning(image_size)
    lines, mids, dirs = _segment_arrays(segs, T)
    strength = np.array([s.strength for s in segs])
    weights = strength / strength.max()

    orient = np.degrees(np.arctan2(dirs[:, 1], dirs[:, 0])) % 180.0
    if not _has_two_orientations(orient, weights):
        raise VanishingError("insufficient-structure", "fewer than two orientation clusters")

    top = min(len(segs), max_segments)
    cands = []
    for i, j in itertools.combinations(range(top), 2):
        v = np.cross(lines[i], lines[j])
        n = np.linalg.norm(v)
        if n < 1e-12:
            continue
        cands.append(v / n)
    cands = np.array(cands)
    angles = consistency_angles(cands, mids, dirs)
    scores = np.where(angles <= inlier_angle_deg, weights[:, None], 0.0).sum(0)
    cands = _distinct_candidates(cands, scores, angles <= inlier_angle_deg, weights, max_candidates)
    # a pairwise intersection inherits the error of two short segments; the
    # least-squares point of all its inliers is far more stable
    if len(cands):
        ok = consistency_angles(cands, mids, dirs) <= inlier_angle_deg
        refined = np.array([_refine_vp(lines[ok[:, k]], weights[ok[:, k]], cands[k]) for k in range(len(cands))])
        cands = np.concatenate([refined, cands])
        angles = consistency_angles(cands, mids, dirs)
        scores = np.where(angles <= inlier_angle_deg, weights[:, None], 0.0).sum(0)
        cands = _distinct_candidates(cands, scores, None, weights, max_candidates)
    if len(cands) < 3:
        raise VanishingError("insufficient-structure", "fewer than three distinct candidates")

    angles = consistency_angles(cands, mids, dirs)
    triples = np.array(list(itertools.combinations(range(len(cands)), 3)))
    A = angles[:, triples]  # (nseg, T, 3)
    best = A.min(axis=2)
    tscore = np.where(best <= inlier_angle_deg, weights[:, None], 0.0).sum(0)
    tscore = np.round(tscore / max(tscore.max(), 1e-300), 12)

    chosen = None
    for t in np.argsort(-tscore, kind="stable"):
        if tscore[t] <= 0:
            break
        vs = [cands[k] for k in triples[t]]
        ix, iy, iz = _label_triple(vs)
        ordered = [vs[ix], vs[iy], vs[iz]]
        if _consistent(ordered, T_inv, image_size, orthogonality_tol_deg):
            key = _tie_key(ordered, T_inv)
            if chosen is None:
                chosen = (tscore[t], key, ordered)
            elif tscore[t] == chosen[0] and key < chosen[1]:
                chosen = (tscore[t], key, ordered)
            elif tscore[t] < chosen[0]:
                break
    if chosen is None:
        chosen_vs = _best_pair_completion(
            cands, mids, dirs, angles, weights, T, T_inv, image_size, inlier_angle_deg
        )
        if chosen_vs is None:
            raise VanishingError("insufficient-structure", "no orthogonal vanishing-point triple found")
    else:
        chosen_vs = chosen[2]

    # assign, refine, reassign
    vs = np.array(chosen_vs)
    for _ in range(2):
        ang = consistency_angles(vs, mids, dirs)
        owner = np.argmin(ang, axis=1)
        ok = ang[np.arange(len(segs)), owner] <= inlier_angle_deg
        vs = np.array(
            [_refine_vp(lines[ok & (owner == k)], weights[ok & (owner == k)], vs[k]) for k in range(3)]
        )
    ang = consistency_angles(vs, mids, dirs)
    owner = np.argmin(ang, axis=1)
    ok = ang[np.arange(len(segs)), owner] <= inlier_angle_deg
    inliers = tuple(
        np.array(sorted(canon[i] for i in np.nonzero(ok & (owner == k))[0]), dtype=int) for k in range(3)
    )
    px = [_to_pixels(v, T_inv) for v in vs]
    return VanishingTriple(px[0], px[1], px[2], inliers, segments)


def _has_two_orientations(orient, weights, sep_deg=20.0):
    if len(orient) < 2:
        return False
    ref = orient[int(np.argmax(weights))]
    diff = np.abs((orient - ref + 90.0) % 180.0 - 90.0)
    return bool(np.any(diff > sep_deg))


def _sphere(v, f0=1.0):
    u = np.array([v[0], v[1], v[2] * f0])
    return u / np.linalg.norm(u)


def _distinct_candidates(cands, scores, inliers, weights, limit, min_sep_deg=0.5, max_shared=0.5):
    """Highest-scoring candidates, skipping near-duplicates on the sphere and,
    when an inlier matrix is given, candidates whose inliers mostly belong to
    an already kept one (many pairwise intersections land near the same VP)."""
    order = np.lexsort((cands[:, 1], cands[:, 0], -scores))
    kept, kept_s, kept_in = [], [], []
    cos_sep = np.cos(np.radians(min_sep_deg))
    for k in order:
        if scores[k] <= 0:
            break
        u = _sphere(cands[k])
        if any(abs(u @ q) >= cos_sep for q in kept_s):
            continue
        if inliers is not None:
            mine = inliers[:, k]
            own = weights[mine].sum()
            if any(weights[mine & q].sum() > max_shared * own for q in kept_in):
                continue
            kept_in.append(mine)
        kept.append(cands[k])
        kept_s.append(u)
        if len(kept) >= limit:
            break
    return np.array(kept)


def _tie_key(ordered, T_inv):
    vx = _to_pixels(ordered[0], T_inv)
    if abs(vx[2]) > HOMOGENEOUS_EPS:
        return (float(vx[0] / vx[2]), float(vx[1] / vx[2]))
    return (np.inf, float(vx[1]))


def _consistent(ordered, T_inv, image_size, tol_deg):
    px = [_to_pixels(v, T_inv) for v in ordered]
    finite = [abs(v[2]) > HOMOGENEOUS_EPS for v in px]
    s = max(image_size)
    center = 0.5 * np.asarray(image_size, dtype=float)
    if sum(finite) < 2:
        inf = [v[:2] / np.linalg.norm(v[:2]) for v, f in zip(px, finite) if not f]
        if len(inf) == 3:
            return False
        if abs(inf[0] @ inf[1]) > np.sin(np.radians(tol_deg)):
            return False
        fin = [v for v, f in zip(px, finite) if f][0]
        return np.linalg.norm(fin[:2] / fin[2] - center) <= 0.1 * s
    try:
        cam = calibrate(VanishingTriple(*px), image_size)
    except CalibrationError:
        return False
    if not (0.25 * s <= cam.focal <= 20.0 * s):
        return False
    if np.linalg.norm(cam.principal_point - center) > 0.25 * s:
        return False
    return orthogonality_error_deg(px, cam) <= tol_deg


def _best_pair_completion(cands, mids, dirs, angles, weights, T, T_inv, image_size, thr):
    """Fallback: two candidates fix the camera (principal point at the image
    center), the third VP is predicted from their cross product."""
    s = max(image_size)
    center = 0.5 * np.asarray(image_size, dtype=float)
    best = None
    for i, j in itertools.combinations(range(len(cands)), 2):
        a, b = _to_pixels(cands[i], T_inv), _to_pixels(cands[j], T_inv)
        if abs(a[2]) <= HOMOGENEOUS_EPS or abs(b[2]) <= HOMOGENEOUS_EPS:
            continue
        f2 = -((a[:2] / a[2] - center) @ (b[:2] / b[2] - center))
        if f2 <= (0.25 * s) ** 2 or f2 >= (20 * s) ** 2:
            continue
        f = np.sqrt(f2)
        K = np.array([[f, 0, center[0]], [0, f, center[1]], [0, 0, 1.0]])
        Ki = np.linalg.inv(K)
        v3 = T @ (K @ np.cross(Ki @ (a / a[2]), Ki @ (b / b[2])))
        v3 /= np.linalg.norm(v3)
        ang3 = np.c_[angles[:, i], angles[:, j], consistency_angles(v3, mids, dirs)[:, 0]]
        score = np.where(ang3.min(1) <= thr, weights, 0.0).sum()
        if best is None or score > best[0]:
            vs = [cands[i], cands[j], v3]
            ix, iy, iz = _label_triple(vs)
            best = (score, [vs[ix], vs[iy], vs[iz]])
    return None if best is None else best[1]


# ----------------------------------------------------------------------------
# calibration


def orthocenter(a, b, c) -> np.ndarray:
    a, b, c = (np.asarray(p, dtype=float) for p in (a, b, c))
    A = np.array([b - c, a - c])
    rhs = np.array([a @ (b - c), b @ (a - c)])
    return np.linalg.solve(A, rhs)


def backprojected_directions(points, camera: Camera) -> list[np.ndarray]:
    dirs = []
    for v in points:
        d = camera.K_inv @ np.asarray(v, dtype=float)
        dirs.append(d / np.linalg.norm(d))
    return dirs


def orthogonality_error_deg(points, camera: Camera) -> float:
    """Largest deviation from 90 degrees among back-projected VP directions."""
    d = backprojected_directions(points, camera)
    worst = 0.0
    for i, j in ((0, 1), (0, 2), (1, 2)):
        ang = np.degrees(np.arccos(np.clip(abs(d[i] @ d[j]), 0.0, 1.0)))
        worst = max(worst, 90.0 - ang)
    return float(worst)


def calibrate(triple: VanishingTriple, image_size) -> Camera:
    """Focal length, principal point and rotation from three orthogonal VPs.

    With three finite VPs the principal point is the orthocenter of their
    triangle; otherwise it is the image center.  The returned camera sits at
    the world origin (height unset) with rotation columns equal to the world
    x, y, z axes expressed in camera coordinates.
    """
    pts = [np.asarray(v, dtype=float) / np.linalg.norm(v) for v in triple.points]
    finite = [abs(v[2]) > HOMOGENEOUS_EPS for v in pts]
    nfin = sum(finite)
    if nfin < 2:
        raise CalibrationError("degenerate-calibration", "fewer than two finite vanishing points")
    xy = [v[:2] / v[2] if f else None for v, f in zip(pts, finite)]
    if nfin == 3:
        try:
            pp = orthocenter(*xy)
        except np.linalg.LinAlgError as exc:
            raise CalibrationError("degenerate-calibration", "collinear vanishing points") from exc
        pairs = [(0, 1), (0, 2), (1, 2)]
    else:
        pp = 0.5 * np.asarray(image_size, dtype=float)
        pairs = [tuple(i for i in range(3) if finite[i])]
    f2 = np.mean([-(xy[i] - pp) @ (xy[j] - pp) for i, j in pairs])
    if not np.isfinite(f2) or f2 <= 0:
        raise CalibrationError("degenerate-calibration", f"no real focal length (f^2 = {f2:.6g})")
    f = float(np.sqrt(f2))
    K_inv = np.array([[1 / f, 0, -pp[0] / f], [0, 1 / f, -pp[1] / f], [0, 0, 1.0]])
    dirs = [None, None, None]
    for k in range(3):
        if finite[k]:
            d = K_inv @ (pts[k] / pts[k][2])
            dirs[k] = d / np.linalg.norm(d)
    if nfin == 2:
        k = finite.index(False)
        i, j = [m for m in range(3) if m != k]
        d = np.cross(dirs[i], dirs[j])
        dirs[k] = d / np.linalg.norm(d)
    dx, dy, dz = dirs
    # world up points toward the top of the image (negative camera y)
    if dz[1] > 0:
        dz = -dz
    # depth axis looks into the scene
    if dy[2] < 0 or (dy[2] == 0 and np.cross(dy, dz)[0] < 0):
        dy = -dy
    if np.linalg.det(np.column_stack([dx, dy, dz])) < 0:
        dx = -dx
    R = nearest_rotation(np.column_stack([dx, dy, dz]))
    return Camera(f, pp, R, np.zeros(3), image_size)
