"""Multi-scale gradient-orientation features and the layer-averaged cosine
cost between two feature stacks.

The default extractor builds a Gaussian pyramid and, on every level, a dense
grid of 8x8-pixel cells holding 8-bin histograms of unsigned gradient
orientation.  Coarser levels see larger image neighborhoods per cell, so
their part of the cost stays informative under larger misalignments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import FeatureError

DEFAULT_LEVELS = 5
DEFAULT_BINS = 8
DEFAULT_CELL = 8
CELL_EPS = 1.0
CELL_CLIP = 0.2


@dataclass
class FeatureStack:
    """Ordered feature maps, finest first; each layer is (H_i, W_i, C_i)."""

    layers: list

    def __post_init__(self):
        self.layers = [np.asarray(l, dtype=float) for l in self.layers]
        if len(self.layers) < 2:
            raise FeatureError("bad-stack", "a feature stack needs at least two layers")
        sizes = [l.shape[0] * l.shape[1] for l in self.layers]
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise FeatureError("bad-stack", f"layer sizes must strictly decrease, got {sizes}")
        if not all(np.all(np.isfinite(l)) for l in self.layers):
            raise FeatureError("bad-stack", "non-finite feature values")

    def __len__(self):
        return len(self.layers)

    @property
    def shapes(self):
        return [l.shape for l in self.layers]


@dataclass(frozen=True)
class FeatureConfig:
    levels: int = DEFAULT_LEVELS
    bins: int = DEFAULT_BINS
    cell: int = DEFAULT_CELL
    eps: float = CELL_EPS
    clip: float = CELL_CLIP


def to_float_image(image) -> np.ndarray:
    img = np.asarray(image)
    if img.dtype == np.uint8:
        img = img.astype(float) / 255.0
    else:
        img = img.astype(float)
    if img.ndim == 2:
        img = img[..., None]
    return img[..., :3]


def gradients(img):
    """Central-difference gradients; per pixel, the channel with the largest
    magnitude wins.  Returns (magnitude, orientation in [0, pi))."""
    k = np.array([-1.0, 0.0, 1.0]) * 0.5
    gx = ndimage.correlate1d(img, k, axis=1, mode="nearest")
    gy = ndimage.correlate1d(img, k, axis=0, mode="nearest")
    mag2 = gx * gx + gy * gy
    best = np.argmax(mag2, axis=2)[..., None]
    gx = np.take_along_axis(gx, best, axis=2)[..., 0]
    gy = np.take_along_axis(gy, best, axis=2)[..., 0]
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    return mag, theta


def orientation_votes(mag, theta, bins):
    """Linear soft assignment of each pixel's magnitude to its two nearest
    orientation bins (centers at k*pi/bins).  Returns (H, W, bins)."""
    pos = theta / (np.pi / bins)
    b0 = np.floor(pos).astype(int) % bins
    frac = pos - np.floor(pos)
    b1 = (b0 + 1) % bins
    votes = np.zeros(mag.shape + (bins,))
    rr, cc = np.indices(mag.shape)
    np.add.at(votes, (rr, cc, b0), mag * (1.0 - frac))
    np.add.at(votes, (rr, cc, b1), mag * frac)
    return votes


def _votes_fast(mag, theta, bins):
    pos = theta / (np.pi / bins)
    fl = np.floor(pos)
    frac = pos - fl
    b0 = fl.astype(int) % bins
    b1 = (b0 + 1) % bins
    votes = np.zeros(mag.shape + (bins,))
    w0 = mag * (1.0 - frac)
    w1 = mag * frac
    for b in range(bins):
        votes[..., b] = np.where(b0 == b, w0, 0.0) + np.where(b1 == b, w1, 0.0)
    return votes


def tent_weights(n_pixels: int, cell: int) -> np.ndarray:
    """(cells, pixels) bilinear voting weights: a pixel at distance d from a
    cell center contributes ``max(0, 1 - d / cell)`` to that cell."""
    n_cells = n_pixels // cell
    centers = cell * (np.arange(n_cells) + 0.5)
    d = np.abs(np.arange(n_pixels) + 0.5 - centers[:, None])
    return np.maximum(0.0, 1.0 - d / cell)


def cell_histograms(img, cfg: FeatureConfig) -> np.ndarray:
    """Orientation histograms on a grid of ``cell`` x ``cell`` cells with
    bilinear spatial voting, then per-cell ``h / sqrt(|h|^2 + eps^2)``
    clipped at ``clip``."""
    mag, theta = gradients(img)
    votes = _votes_fast(mag, theta, cfg.bins)
    h, w = mag.shape
    wy = tent_weights(h, cfg.cell)
    wx = tent_weights(w, cfg.cell)
    rows = (wy @ votes.reshape(h, -1)).reshape(len(wy), w, cfg.bins)
    hist = np.einsum("jw,iwb->ijb", wx, rows)
    norm = np.sqrt((hist * hist).sum(axis=2, keepdims=True) + cfg.eps**2)
    return np.minimum(hist / norm, cfg.clip)


def pyramid(img, levels: int) -> list:
    out = [img]
    for _ in range(levels - 1):
        blurred = ndimage.gaussian_filter(out[-1], sigma=(1.0, 1.0, 0.0), mode="nearest")
        out.append(blurred[::2, ::2])
    return out


def usable_levels(shape, cfg: FeatureConfig) -> int:
    """Number of pyramid levels whose cell grids are non-empty and strictly
    shrinking, capped at ``cfg.levels``."""
    h, w = shape[:2]
    n, prev = 0, None
    for _ in range(cfg.levels):
        cells = (h // cfg.cell) * (w // cfg.cell)
        if cells < 1 or (prev is not None and cells >= prev):
            break
        n, prev = n + 1, cells
        h, w = (h + 1) // 2, (w + 1) // 2
    return n


def extract(image, config: FeatureConfig | None = None) -> FeatureStack:
    """Gradient-orientation feature stack of an image (finest layer first)."""
    cfg = config or FeatureConfig()
    img = to_float_image(image)
    if img.shape[0] < 64 or img.shape[1] < 64:
        raise FeatureError("image-too-small", f"{img.shape[1]}x{img.shape[0]} is below 64x64")
    n = usable_levels(img.shape, cfg)
    return FeatureStack([cell_histograms(level, cfg) for level in pyramid(img, n)])


def load_stack(directory) -> FeatureStack:
    """Read a precomputed stack from ``layer_0.f32``, ``layer_1.f32``, ..."""
    from .io import read_f32map

    directory = Path(directory)
    layers = []
    k = 0
    while True:
        matches = sorted(directory.glob(f"layer_{k}.*")) or sorted(directory.glob(f"layer_{k}"))
        if not matches:
            break
        layers.append(read_f32map(matches[0]))
        k += 1
    if not layers:
        raise FeatureError("no-layers", f"no layer_0 file in {directory}")
    return FeatureStack(layers)


def save_stack(stack: FeatureStack, directory) -> None:
    from .io import write_f32map

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, layer in enumerate(stack.layers):
        write_f32map(directory / f"layer_{k}.f32", layer)


def layer_cosine_costs(a: FeatureStack, b: FeatureStack) -> np.ndarray:
    """Per-layer ``1 - cos`` between flattened layers.

    A layer that is zero on exactly one side costs 1; zero on both sides, 0.
    """
    if a.shapes != b.shapes:
        raise FeatureError("dimension-mismatch", f"{a.shapes} vs {b.shapes}")
    out = np.empty(len(a))
    for i, (x, y) in enumerate(zip(a.layers, b.layers)):
        x = x.ravel()
        y = y.ravel()
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx == 0 or ny == 0:
            out[i] = 0.0 if nx == ny else 1.0
        else:
            out[i] = 1.0 - float(x @ y) / (nx * ny)
    return out


def cosine_cost(a: FeatureStack, b: FeatureStack) -> float:
    """Mean over layers of one minus the cosine similarity."""
    return float(layer_cosine_costs(a, b).mean())


# ----------------------------------------------------------------------------
# fixed-length descriptor for crops


def descriptor(image, grid: int = 4, levels: int = 3, bins: int = DEFAULT_BINS, size: int = 64) -> np.ndarray:
    """Unit-norm, non-negative descriptor whose length is independent of the
    crop's size and aspect ratio.

    The crop is uniformly resampled so its longer side is ``size`` pixels;
    on each of ``levels`` pyramid levels the orientation votes are pooled
    into a ``grid x grid`` layout of cells spanning the whole crop.
    """
    img = to_float_image(image)
    h, w = img.shape[:2]
    if h < 2 or w < 2:
        raise FeatureError("image-too-small", f"crop {w}x{h}")
    s = size / max(h, w)
    img = ndimage.zoom(img, (s, s, 1.0), order=1, mode="nearest", grid_mode=True)
    parts = []
    for level in pyramid(img, levels):
        mag, theta = gradients(level)
        votes = _votes_fast(mag, theta, bins)
        lh, lw = mag.shape
        ry = np.minimum((np.arange(lh) * grid) // max(lh, 1), grid - 1)
        rx = np.minimum((np.arange(lw) * grid) // max(lw, 1), grid - 1)
        pooled = np.zeros((grid, grid, bins))
        np.add.at(pooled, (ry[:, None], rx[None, :]), votes)
        n = np.linalg.norm(pooled)
        parts.append(pooled.ravel() / n if n > 0 else pooled.ravel())
    vec = np.concatenate(parts)
    n = np.linalg.norm(vec)
    return vec / n if n > 0 else vec
