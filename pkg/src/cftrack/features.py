"""Hand-crafted features pooled over cells: intensity, oriented gradients, color.

A patch is divided into cell_size x cell_size cells. Each cell yields one
mean-intensity value, a magnitude-weighted orientation histogram, and the
mean of a coarse color assignment, all concatenated channel-wise and
optionally tapered by a Hann window over the cell grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import FormatError
from .imaging import Patch, gradients, luminance
from .spectral import FeatureStack

__all__ = ["FeatureConfig", "hann_window", "extract_features", "load_color_table"]

# Voronoi seeds partitioning the RGB cube into ten fixed regions. Chosen as
# the cube's primaries/secondaries plus black, white, gray and orange so the
# channels behave like a crude color-naming descriptor.
_COLOR_SEEDS = np.array(
    [
        [0.0, 0.0, 0.0],  # black
        [1.0, 1.0, 1.0],  # white
        [0.5, 0.5, 0.5],  # gray
        [1.0, 0.0, 0.0],  # red
        [0.0, 1.0, 0.0],  # green
        [0.0, 0.0, 1.0],  # blue
        [1.0, 1.0, 0.0],  # yellow
        [0.0, 1.0, 1.0],  # cyan
        [1.0, 0.0, 1.0],  # magenta
        [1.0, 0.5, 0.0],  # orange
    ]
)


@dataclass(frozen=True)
class FeatureConfig:
    """Which descriptors to extract and how to pool them."""

    cell_size: int = 4
    hog_orientations: int = 9
    use_intensity: bool = True
    use_hog: bool = True
    use_color: bool = True
    window: bool = True
    # optional path to an RGB -> 11-name probability table; empty = use the
    # built-in 10-region quantization
    color_table: str = ""

    def __post_init__(self):
        if self.cell_size < 1:
            raise ValueError("cell_size must be at least 1")
        if self.hog_orientations < 2:
            raise ValueError("hog_orientations must be at least 2")


def hann_window(w: int, h: int) -> np.ndarray:
    """Separable 2D Hann taper of shape (h, w); the 1x1 window is 1."""
    if w < 1 or h < 1:
        raise ValueError("window size must be at least 1x1")
    return np.outer(np.hanning(h), np.hanning(w))


@lru_cache(maxsize=4)
def load_color_table(path: str) -> np.ndarray:
    """Parse an RGB -> color-name probability table.

    Expected layout: 32768 lines, one per 15-bit RGB index
    (floor(r*255/8) + 32*floor(g*255/8) + 1024*floor(b*255/8)), each holding
    11 space-separated probabilities summing to 1.
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 11:
                raise FormatError(
                    f"expected 11 probabilities, got {len(parts)}", path, lineno
                )
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise FormatError("non-numeric probability", path, lineno) from None
            if min(vals) < 0 or abs(sum(vals) - 1.0) > 1e-6:
                raise FormatError("probabilities must be >= 0 and sum to 1", path, lineno)
            rows.append(vals)
    if len(rows) != 32768:
        raise FormatError(f"expected 32768 rows, got {len(rows)}", path)
    return np.asarray(rows, dtype=np.float64)


def _cell_mean(values: np.ndarray, cell: int) -> np.ndarray:
    h, w = values.shape[:2]
    gh, gw = h // cell, w // cell
    if values.ndim == 2:
        return values.reshape(gh, cell, gw, cell).mean(axis=(1, 3))
    tail = values.shape[2]
    return values.reshape(gh, cell, gw, cell, tail).mean(axis=(1, 3))


def _hog_cells(gray: np.ndarray, cell: int, nbins: int) -> np.ndarray:
    """Per-cell orientation histograms with magnitude votes, L2-normalized."""
    mag, ori = gradients(gray)
    h, w = gray.shape
    gh, gw = h // cell, w // cell
    bins = np.minimum((ori / np.pi * nbins).astype(np.int64), nbins - 1)
    rows, cols = np.indices(gray.shape)
    cell_idx = (rows // cell) * gw + (cols // cell)
    flat = cell_idx * nbins + bins
    votes = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=gh * gw * nbins)
    votes = votes.reshape(gh, gw, nbins)
    norm = np.sqrt(np.sum(votes * votes, axis=2, keepdims=True) + 1e-12)
    return votes / norm


def _color_cells(pixels: np.ndarray, cell: int, table: np.ndarray | None) -> np.ndarray:
    h, w = pixels.shape[:2]
    if table is None:
        d2 = np.sum(
            (pixels[:, :, None, :] - _COLOR_SEEDS[None, None, :, :]) ** 2, axis=3
        )
        labels = np.argmin(d2, axis=2)
        gh, gw = h // cell, w // cell
        rows, cols = np.indices(labels.shape)
        cell_idx = (rows // cell) * gw + (cols // cell)
        flat = cell_idx * _COLOR_SEEDS.shape[0] + labels
        counts = np.bincount(flat.ravel(), minlength=gh * gw * _COLOR_SEEDS.shape[0])
        per_cell = counts.reshape(gh, gw, _COLOR_SEEDS.shape[0]) / float(cell * cell)
        return per_cell
    q = np.minimum((pixels * 255.0 / 8.0).astype(np.int64), 31)
    idx = q[..., 0] + 32 * q[..., 1] + 1024 * q[..., 2]
    probs = table[idx]  # (h, w, 11)
    return _cell_mean(probs, cell)


def extract_features(patch: Patch, cfg: FeatureConfig) -> FeatureStack:
    """Pool the configured descriptors over cells and stack them channel-wise."""
    px = np.asarray(patch.pixels, dtype=np.float64)
    h, w = px.shape[:2]
    cell = cfg.cell_size
    if h % cell != 0 or w % cell != 0:
        raise ValueError(
            f"patch size {w}x{h} not divisible by cell_size {cell}; resize first"
        )
    gh, gw = h // cell, w // cell

    chans = []
    gray = luminance(px)
    if cfg.use_intensity:
        # centered so the DC offset does not dominate the Gaussian kernel
        chans.append(_cell_mean(gray, cell) - 0.5)
    if cfg.use_hog:
        hog = _hog_cells(gray, cell, cfg.hog_orientations)
        chans.extend(hog[:, :, k] for k in range(cfg.hog_orientations))
    if cfg.use_color:
        table = load_color_table(cfg.color_table) if cfg.color_table else None
        colors = _color_cells(px, cell, table)
        chans.extend(colors[:, :, k] for k in range(colors.shape[2]))
    if not chans:
        raise ValueError("at least one descriptor family must be enabled")

    data = np.stack(chans)
    if cfg.window:
        data = data * hann_window(gw, gh)[None, :, :]
    return FeatureStack(data, cell_size=cell)
