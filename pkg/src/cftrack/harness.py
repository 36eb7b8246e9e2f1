"""Benchmark harness: dataset I/O, one-pass evaluation metrics, ablations.

Sequences follow the common layout of an `img/` directory with numbered
frames next to a `groundtruth_rect.txt` whose lines are `x,y,w,h` in
1-based pixel coordinates (comma or tab separated). Internally all boxes
are 0-based.
"""

from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .imaging import BBox, Frame, iou, load_frame
from .selection import TargetState
from .tracker import FrameTiming, SequenceResult, TrackerConfig, run_sequence

__all__ = [
    "Sequence",
    "EvalReport",
    "AblationRow",
    "load_otb_sequence",
    "iter_frames",
    "load_frames",
    "center_error",
    "overlap",
    "evaluate",
    "run_on_sequence",
    "ablate_percentages",
]

_IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=np.float64)  # pixels
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)  # overlap ratios


@dataclass(frozen=True)
class Sequence:
    frames: tuple[str, ...]
    groundtruth: tuple[BBox, ...]
    name: str = "sequence"
    attributes: frozenset[str] = frozenset()

    def __post_init__(self):
        if len(self.frames) < 1:
            raise ValueError("a sequence needs at least one frame")
        if self.groundtruth and len(self.groundtruth) != len(self.frames):
            raise ValueError("ground-truth count must match frame count")


@dataclass(frozen=True)
class EvalReport:
    center_errors: np.ndarray
    overlaps: np.ndarray
    precision_curve: np.ndarray  # 51 values, thresholds 0..50 px
    success_curve: np.ndarray  # 21 values, thresholds 0..1 step 0.05
    dp20: float
    auc: float
    fps: float

    def to_dict(self) -> dict:
        return {
            "dp20": self.dp20,
            "auc": self.auc,
            "fps": self.fps,
            "precision_curve": [float(v) for v in self.precision_curve],
            "success_curve": [float(v) for v in self.success_curve],
        }


@dataclass(frozen=True)
class AblationRow:
    fraction: float
    instance_mode: str
    dp20: float
    auc: float
    fps: float


def _numeric_key(filename: str) -> int:
    digits = re.findall(r"\d+", os.path.basename(filename))
    if not digits:
        raise FormatError(f"frame image {filename!r} has no number to sort by")
    return int(digits[-1])


def load_otb_sequence(directory: str) -> Sequence:
    """Load an image-directory sequence with its ground-truth boxes."""
    img_dir = os.path.join(directory, "img")
    if not os.path.isdir(img_dir):
        raise FormatError(f"missing image directory {img_dir!r}")
    names = [n for n in os.listdir(img_dir) if n.lower().endswith(_IMAGE_EXTENSIONS)]
    if not names:
        raise FormatError(f"no frame images in {img_dir!r}")
    names.sort(key=lambda n: (_numeric_key(n), n))
    frames = tuple(os.path.join(img_dir, n) for n in names)

    gt_path = os.path.join(directory, "groundtruth_rect.txt")
    if not os.path.isfile(gt_path):
        raise FormatError(f"missing ground-truth file {gt_path!r}")
    boxes = read_boxes(gt_path, one_based=True)
    if len(boxes) != len(frames):
        raise FormatError(
            f"{len(boxes)} ground-truth lines for {len(frames)} frames", path=gt_path
        )

    attributes: frozenset[str] = frozenset()
    attr_path = os.path.join(directory, "attrs.txt")
    if os.path.isfile(attr_path):
        with open(attr_path, "r", encoding="utf-8") as fh:
            attributes = frozenset(line.strip() for line in fh if line.strip())

    name = os.path.basename(os.path.normpath(directory))
    return Sequence(frames, tuple(boxes), name, attributes)


def read_boxes(path: str, one_based: bool = False) -> list[BBox]:
    """Parse `x,y,w,h` lines (comma, tab or space separated) into boxes."""
    offset = 1.0 if one_based else 0.0
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = [p for p in line.replace(",", " ").replace("\t", " ").split() if p]
            if len(parts) != 4:
                raise FormatError("expected 4 values x,y,w,h", path=path, line=lineno)
            try:
                x, y, w, h = (float(p) for p in parts)
            except ValueError:
                raise FormatError(f"non-numeric value in {line!r}", path=path, line=lineno) from None
            if w <= 0 or h <= 0:
                raise FormatError("box width and height must be positive", path=path, line=lineno)
            if not all(math.isfinite(v) for v in (x, y, w, h)):
                raise FormatError("box values must be finite", path=path, line=lineno)
            boxes.append(BBox(x - offset, y - offset, w, h))
    return boxes


def write_boxes(path: str, boxes, one_based: bool = False) -> None:
    offset = 1.0 if one_based else 0.0
    with open(path, "w", encoding="utf-8") as fh:
        for b in boxes:
            box = b.box if isinstance(b, TargetState) else b
            fh.write(f"{box.x + offset:.2f},{box.y + offset:.2f},{box.w:.2f},{box.h:.2f}\n")


def iter_frames(seq: Sequence):
    for index, path in enumerate(seq.frames):
        yield load_frame(path, index)


def load_frames(seq: Sequence) -> list[Frame]:
    return list(iter_frames(seq))


def _as_box(pred) -> BBox:
    return pred.box if isinstance(pred, TargetState) else pred


def center_error(pred, gt: BBox) -> float:
    """Euclidean distance between predicted and true box centers, in pixels."""
    pc = _as_box(pred).center
    gc = gt.center
    return math.hypot(pc[0] - gc[0], pc[1] - gc[1])


def overlap(pred, gt: BBox) -> float:
    return iou(_as_box(pred), gt)


def _fps_from_timings(timings, n_frames: int) -> float:
    if timings is None:
        return 0.0
    total = 0.0
    for t in timings:
        total += t.total if isinstance(t, FrameTiming) else float(t)
    if total <= 0.0:
        return 0.0
    return n_frames / total


def evaluate(preds, gts, timings=None) -> EvalReport:
    """Score predictions against ground truth with the usual one-pass curves.

    precision_curve[t] is the fraction of frames whose center error is at
    most t pixels; success_curve[tau] is the fraction whose overlap exceeds
    tau (strict). dp20 reads the precision curve at 20 px and auc averages
    the 21 success thresholds.
    """
    preds = list(preds)
    gts = list(gts)
    if len(preds) != len(gts) or not preds:
        raise ValueError("predictions and ground truth must have equal non-zero length")
    errors = np.array([center_error(p, g) for p, g in zip(preds, gts)])
    overlaps = np.array([overlap(p, g) for p, g in zip(preds, gts)])
    precision = (errors[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)
    success = (overlaps[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return EvalReport(
        center_errors=errors,
        overlaps=overlaps,
        precision_curve=precision,
        success_curve=success,
        dp20=float(precision[20]),
        auc=float(success.mean()),
        fps=_fps_from_timings(timings, len(preds)),
    )


def run_on_sequence(seq: Sequence, cfg: TrackerConfig | None = None, collect_info: bool = False) -> SequenceResult:
    if not seq.groundtruth:
        raise ValueError("sequence has no ground truth to initialize from")
    return run_sequence(iter_frames(seq), seq.groundtruth[0], cfg, collect_info)


def ablate_percentages(seq: Sequence, cfg: TrackerConfig | None = None, fractions=(0.3, 0.5, 0.7, 1.0), instance_modes=("both",)) -> list[AblationRow]:
    """Re-run the tracker per kept-proposal fraction and instance mode.

    Frames are decoded once and reused across runs. Rows are ordered by
    instance mode first, then by the input fraction order.
    """
    if cfg is None:
        cfg = TrackerConfig()
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise ValueError("fractions must lie in (0, 1]")
    if not seq.groundtruth:
        raise ValueError("sequence has no ground truth to initialize from")
    frames = load_frames(seq)
    rows = []
    for mode in instance_modes:
        for frac in fractions:
            selector = dataclasses.replace(cfg.selector, keep_fraction=float(frac), instance_mode=mode)
            run_cfg = dataclasses.replace(cfg, selector=selector)
            result = run_sequence(frames, seq.groundtruth[0], run_cfg)
            report = evaluate(result.states, seq.groundtruth, result.timings)
            rows.append(AblationRow(float(frac), mode, report.dp20, report.auc, report.fps))
    return rows
