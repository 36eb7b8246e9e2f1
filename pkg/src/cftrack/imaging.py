"""Pixel-level primitives: frames, boxes, cropping, color, gradients.

Everything downstream operates on float64 arrays with channels in [0, 1].
Arrays follow the numpy convention of (rows, cols) = (height, width);
box coordinates are real-valued with x along columns and y along rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

__all__ = [
    "Frame",
    "BBox",
    "Patch",
    "crop",
    "sample_region",
    "rgb_to_hsv",
    "luminance",
    "iou",
    "gradients",
    "load_frame",
]


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: real-valued top-left corner plus positive size."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"box {name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box size must be positive, got {self.w}x{self.h}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class Frame:
    """One decoded video frame: (height, width, 3) pixels plus a 1-based index."""

    pixels: np.ndarray
    index: int = 1

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError("frame pixels must have shape (height, width, 3)")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame must contain at least one pixel")
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Patch:
    """Pixels cut from a frame together with the box they were cut through."""

    pixels: np.ndarray
    source_bbox: BBox

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def sample_region(pixels: np.ndarray, box: BBox, out_w: int, out_h: int) -> np.ndarray:
    """Bilinearly resample the region under `box` to (out_h, out_w).

    Sample coordinates outside the source are clamped, which realizes
    edge replication. When the box is axis-aligned on integer pixels and
    the output size equals the box size, samples land exactly on source
    pixel centers and the result is byte-exact.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be at least 1x1")
    src = np.asarray(pixels, dtype=np.float64)
    h, w = src.shape[0], src.shape[1]

    # centers of output pixels mapped into source coordinates
    sx = box.x + (np.arange(out_w) + 0.5) * (box.w / out_w) - 0.5
    sy = box.y + (np.arange(out_h) + 0.5) * (box.h / out_h) - 0.5

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    xa = np.clip(x0.astype(np.int64), 0, w - 1)
    xb = np.clip(x0.astype(np.int64) + 1, 0, w - 1)
    ya = np.clip(y0.astype(np.int64), 0, h - 1)
    yb = np.clip(y0.astype(np.int64) + 1, 0, h - 1)

    wx = fx[None, :]
    wy = fy[:, None]
    if src.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    ya_, yb_ = ya[:, None], yb[:, None]
    xa_, xb_ = xa[None, :], xb[None, :]

    top = src[ya_, xa_] * (1.0 - wx) + src[ya_, xb_] * wx
    bot = src[yb_, xa_] * (1.0 - wx) + src[yb_, xb_] * wx
    return top * (1.0 - wy) + bot * wy


def crop(frame: Frame, box: BBox, out_w: int, out_h: int) -> Patch:
    """Cut `box` out of the frame and resize to (out_w, out_h).

    Out-of-frame samples replicate the nearest edge pixel rather than
    introducing artificial dark borders that would register as edges.
    """
    return Patch(sample_region(frame.pixels, box, out_w, out_h), box)


def rgb_to_hsv(rgb) -> np.ndarray:
    """Hexcone RGB -> HSV on arrays of shape (..., 3), channels in [0, 1].

    H lies in [0, 1) (hue angle / 360 degrees); gray pixels get H = 0 and
    S = 0 so the conversion is total.
    """
    a = np.asarray(rgb, dtype=np.float64)
    if a.shape[-1] != 3:
        raise ValueError("expected RGB triples along the last axis")
    if np.any(a < 0.0) or np.any(a > 1.0):
        raise ValueError("RGB channels must lie in [0, 1]")
    r, g, b = a[..., 0], a[..., 1], a[..., 2]
    maxc = np.max(a, axis=-1)
    minc = np.min(a, axis=-1)
    delta = maxc - minc

    v = maxc
    s = np.where(maxc > 0.0, delta / np.where(maxc > 0.0, maxc, 1.0), 0.0)

    safe = np.where(delta > 0.0, delta, 1.0)
    hue_r = np.mod((g - b) / safe, 6.0)
    hue_g = (b - r) / safe + 2.0
    hue_b = (r - g) / safe + 4.0
    h = np.where(maxc == r, hue_r, np.where(maxc == g, hue_g, hue_b))
    h = np.where(delta > 0.0, h / 6.0, 0.0)
    h = np.mod(h, 1.0)
    return np.stack([h, s, v], axis=-1)


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Rec. 601 grayscale of an (..., 3) RGB array."""
    a = np.asarray(pixels, dtype=np.float64)
    return 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel gradient magnitude and orientation of a 2D array.

    Central differences in the interior, one-sided at the borders.
    Orientation is the gradient angle folded into [0, pi); zero-gradient
    pixels report orientation 0.
    """
    g = np.asarray(gray, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 2 or g.shape[1] < 2:
        raise ValueError("gradients need at least a 2x2 array")
    gy, gx = np.gradient(g)
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)
    # mod can round up to pi for angles just below zero
    ori = np.where(ori >= np.pi, 0.0, ori)
    return mag, ori


def load_frame(path, index: int = 1) -> Frame:
    """Decode a PNG/JPEG file into a Frame, scaling channels by 1/255."""
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        px = np.asarray(rgb, dtype=np.float64) / 255.0
    return Frame(px, index=index)
