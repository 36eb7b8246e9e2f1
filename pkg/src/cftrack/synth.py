"""Deterministic synthetic sequences for benchmarking and tests.

A scene is a textured shape translating and growing linearly over a
static background, optionally accompanied by distractor shapes.
Rendering is pure: the same spec and seed always produce bit-identical
frames, and the ground truth follows the analytic motion schedule
exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .errors import ConfigError
from .imaging import BBox, Frame

__all__ = [
    "Distractor",
    "SynthSpec",
    "target_box_at",
    "distractor_box_at",
    "render_sequence",
    "write_sequence",
    "load_synth_spec",
]


_SHAPES = ("ellipse", "rect")


@dataclass(frozen=True)
class Distractor:
    x: float
    y: float
    w: float
    h: float
    color: tuple[float, float, float]
    vel_x: float = 0.0
    vel_y: float = 0.0
    scale_end: float = 1.0


@dataclass(frozen=True)
class SynthSpec:
    frame_w: int = 320
    frame_h: int = 240
    n_frames: int = 50
    target_x: float = 40.0
    target_y: float = 100.0
    target_w: float = 24.0
    target_h: float = 18.0
    vel_x: float = 2.0
    vel_y: float = 0.0
    scale_end: float = 1.0  # linear growth factor reached on the last frame
    target_color: tuple[float, float, float] = (0.85, 0.55, 0.25)
    target_texture: float = 0.2
    texture_cells: int = 6  # checker divisions across the object
    target_shape: str = "ellipse"  # box corners show background, as real targets do
    bg_level: float = 0.15
    bg_texture: float = 0.0
    frame_noise: float = 0.0
    distractors: tuple[Distractor, ...] = ()

    def __post_init__(self):
        if self.frame_w < 8 or self.frame_h < 8:
            raise ValueError("frame size must be at least 8x8")
        if self.n_frames < 1:
            raise ValueError("n_frames must be at least 1")
        if self.target_w <= 0 or self.target_h <= 0:
            raise ValueError("target size must be positive")
        if self.scale_end <= 0:
            raise ValueError("scale_end must be positive")
        for name in ("target_texture", "bg_texture", "frame_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.target_shape not in _SHAPES:
            raise ValueError(f"target_shape must be one of {_SHAPES}")
        if self.texture_cells < 1:
            raise ValueError("texture_cells must be at least 1")

    def attributes(self) -> frozenset[str]:
        tags = set()
        if self.scale_end != 1.0:
            tags.add("SV")
        return frozenset(tags)


def _scale_at(i: int, n: int, scale_end: float) -> float:
    if n <= 1:
        return 1.0
    return 1.0 + (scale_end - 1.0) * (i / (n - 1))


def _paint_shape(pixels: np.ndarray, box: BBox, color, texture: float, shape: str, cells: int = 6) -> None:
    """Fill the object inscribed in `box` with a textured color.

    The texture is a checker pattern in object coordinates, so it scales
    with the box instead of sliding under it. An ellipse leaves the box
    corners showing background, as real annotations do.
    """
    h_img, w_img = pixels.shape[:2]
    x_lo = max(int(np.ceil(box.x - 0.5)), 0)
    x_hi = min(int(np.ceil(box.x + box.w - 0.5)), w_img)
    y_lo = max(int(np.ceil(box.y - 0.5)), 0)
    y_hi = min(int(np.ceil(box.y + box.h - 0.5)), h_img)
    if x_lo >= x_hi or y_lo >= y_hi:
        return
    xs = np.arange(x_lo, x_hi, dtype=np.float64)
    ys = np.arange(y_lo, y_hi, dtype=np.float64)
    uu = (xs - (box.x - 0.5)) / box.w
    vv = (ys - (box.y - 0.5)) / box.h
    checker = (np.floor(vv[:, None] * cells) + np.floor(uu[None, :] * cells)) % 2.0
    shade = texture * (checker - 0.5)
    tile = np.asarray(color, dtype=np.float64)[None, None, :] + shade[:, :, None]
    tile = np.clip(tile, 0.0, 1.0)
    region = pixels[y_lo:y_hi, x_lo:x_hi, :]
    if shape == "ellipse":
        inside = (2.0 * uu[None, :] - 1.0) ** 2 + (2.0 * vv[:, None] - 1.0) ** 2 <= 1.0
        region[inside] = tile[inside]
    else:
        region[:, :, :] = tile


def target_box_at(spec: SynthSpec, i: int) -> BBox:
    s = _scale_at(i, spec.n_frames, spec.scale_end)
    cx = spec.target_x + spec.target_w / 2.0 + spec.vel_x * i
    cy = spec.target_y + spec.target_h / 2.0 + spec.vel_y * i
    return BBox.from_center(cx, cy, spec.target_w * s, spec.target_h * s)


def distractor_box_at(d: Distractor, i: int, n_frames: int) -> BBox:
    s = _scale_at(i, n_frames, d.scale_end)
    cx = d.x + d.w / 2.0 + d.vel_x * i
    cy = d.y + d.h / 2.0 + d.vel_y * i
    return BBox.from_center(cx, cy, d.w * s, d.h * s)


def render_sequence(spec: SynthSpec, seed: int) -> tuple[list[Frame], list[BBox]]:
    """Render all frames in memory; raises if the target ever leaves the frame."""
    boxes = [target_box_at(spec, i) for i in range(spec.n_frames)]
    for i, b in enumerate(boxes):
        if b.x < 0 or b.y < 0 or b.x + b.w > spec.frame_w or b.y + b.h > spec.frame_h:
            raise ValueError(f"target leaves the frame at index {i}")

    rng = np.random.default_rng(seed)
    base = np.full((spec.frame_h, spec.frame_w, 3), spec.bg_level, dtype=np.float64)
    if spec.bg_texture > 0:
        base += spec.bg_texture * (rng.random(base.shape) * 2.0 - 1.0)
    base = np.clip(base, 0.0, 1.0)

    frames = []
    for i, gt in enumerate(boxes):
        pixels = base.copy()
        if spec.frame_noise > 0:
            noise = spec.frame_noise * (rng.random(pixels.shape) * 2.0 - 1.0)
            pixels = np.clip(pixels + noise, 0.0, 1.0)
        for d in spec.distractors:
            _paint_shape(pixels, distractor_box_at(d, i, spec.n_frames), d.color, spec.target_texture, spec.target_shape, spec.texture_cells)
        _paint_shape(pixels, gt, spec.target_color, spec.target_texture, spec.target_shape, spec.texture_cells)
        frames.append(Frame(pixels, i))
    return frames, boxes


def write_sequence(spec: SynthSpec, seed: int, out_dir: str):
    """Write a rendered sequence as an image directory with ground truth.

    Produces `img/NNNN.png`, `groundtruth_rect.txt` (1-based pixel
    coordinates, comma separated) and, when tags apply, `attrs.txt`.
    Returns the list of image paths.
    """
    frames, boxes = render_sequence(spec, seed)
    img_dir = os.path.join(out_dir, "img")
    os.makedirs(img_dir, exist_ok=True)
    paths = []
    for frame in frames:
        data = np.clip(np.rint(frame.pixels * 255.0), 0, 255).astype(np.uint8)
        path = os.path.join(img_dir, f"{frame.index + 1:04d}.png")
        Image.fromarray(data, "RGB").save(path)
        paths.append(path)
    with open(os.path.join(out_dir, "groundtruth_rect.txt"), "w", encoding="utf-8") as fh:
        for b in boxes:
            fh.write(f"{b.x + 1.0:.2f},{b.y + 1.0:.2f},{b.w:.2f},{b.h:.2f}\n")
    tags = spec.attributes()
    if tags:
        with open(os.path.join(out_dir, "attrs.txt"), "w", encoding="utf-8") as fh:
            for tag in sorted(tags):
                fh.write(tag + "\n")
    return paths


def _parse_distractors(text: str) -> tuple[Distractor, ...]:
    out = []
    for group in text.split(";"):
        group = group.strip()
        if not group:
            continue
        parts = [p for p in group.replace(",", " ").split() if p]
        if len(parts) not in (9, 10):
            raise ConfigError(
                "distractors: each entry needs x y w h r g b vel_x vel_y [scale_end]"
            )
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"distractors: expected numbers, got {group!r}") from None
        scale_end = nums[9] if len(nums) == 10 else 1.0
        out.append(
            Distractor(
                x=nums[0], y=nums[1], w=nums[2], h=nums[3],
                color=(nums[4], nums[5], nums[6]),
                vel_x=nums[7], vel_y=nums[8], scale_end=scale_end,
            )
        )
    return tuple(out)


def load_synth_spec(path: str) -> SynthSpec:
    from .config import _apply_one, parse_settings

    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scene spec {path}: {exc}") from None
    settings = parse_settings(text, path)
    spec = SynthSpec()
    for key, value in settings.items():
        if key == "distractors":
            try:
                spec = replace(spec, distractors=_parse_distractors(value))
            except ValueError as exc:
                raise ConfigError(f"distractors: {exc}") from None
        else:
            spec = _apply_one(spec, key, key, value)
    return spec
