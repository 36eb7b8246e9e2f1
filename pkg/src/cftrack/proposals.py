"""Detection proposals from edge content.

The edge stage is a deliberately simple stand-in for a learned edge
detector: thresholded gradient magnitudes, grouped into contour segments
by 8-connected flood fill that splits when the accumulated orientation
change along the walk exceeds pi/4. Boxes are scored by the edge mass of
contours wholly inside the box, minus the mass in the central half-size
region, normalized by a size penalty.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .imaging import BBox, Patch, gradients, iou, luminance

__all__ = [
    "EdgeMap",
    "Proposal",
    "ProposalConfig",
    "edge_map",
    "suppress_background",
    "contour_affinity",
    "score_box",
    "generate_proposals",
    "iou_prefilter",
]

_NEIGHBORS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class EdgeMap:
    """Per-pixel edge responses, orientations, and contour-segment labels.

    group_id is 0 on non-edge pixels and a positive segment label elsewhere.
    """

    response: np.ndarray
    orientation: np.ndarray
    group_id: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.response.shape


@dataclass
class Proposal:
    """Candidate box in detection-patch coordinates plus its running scores."""

    box: BBox
    edge_score: float
    sim_init: float | None = None
    sim_prev: float | None = None
    combined_score: float | None = None
    response: float | None = None


@dataclass(frozen=True)
class ProposalConfig:
    kappa: float = 1.40
    max_proposals: int = 128
    step_fraction: float = 0.1
    nms_iou: float = 0.8
    iou_low: float = 0.5
    iou_high: float = 0.95
    edge_threshold: float = 0.05
    border_margin: float = 2.0
    border_weight: float = 0.0
    scale_factors: tuple = (0.8, 0.9, 1.0, 1.1, 1.25)
    aspect_factors: tuple = (0.9, 1.0, 1.1)

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0.0 <= self.iou_low <= self.iou_high <= 1.0:
            raise ValueError("need 0 <= iou_low <= iou_high <= 1")
        if self.max_proposals < 1:
            raise ValueError("max_proposals must be at least 1")
        if self.step_fraction <= 0:
            raise ValueError("step_fraction must be positive")
        if not 0.0 <= self.border_weight < 1.0:
            raise ValueError("border_weight must lie in [0, 1)")
        if not self.scale_factors or not self.aspect_factors:
            raise ValueError("need at least one scale and aspect factor")


def _link_groups(response: np.ndarray, orientation: np.ndarray, max_turn: float) -> np.ndarray:
    """Label edge pixels by flood fill, splitting on cumulative turning."""
    h, w = response.shape
    gid = np.zeros((h, w), dtype=np.int32)
    edge = response > 0.0
    next_id = 0
    for r0, c0 in np.argwhere(edge):
        r0, c0 = int(r0), int(c0)
        if gid[r0, c0]:
            continue
        next_id += 1
        gid[r0, c0] = next_id
        queue = deque([(r0, c0, 0.0)])
        while queue:
            r, c, acc = queue.popleft()
            base = orientation[r, c]
            for dr, dc in _NEIGHBORS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and edge[nr, nc] and gid[nr, nc] == 0:
                    turn = abs(float(orientation[nr, nc]) - float(base))
                    turn = min(turn, math.pi - turn)
                    total = acc + turn
                    if total <= max_turn:
                        gid[nr, nc] = next_id
                        queue.append((nr, nc, total))
    return gid


def edge_map(patch: Patch, threshold: float) -> EdgeMap:
    """Thresholded gradient magnitudes grouped into contour segments."""
    px = np.asarray(patch.pixels)
    if px.shape[0] < 3 or px.shape[1] < 3:
        raise ValueError("edge map needs a patch of at least 3x3 pixels")
    mag, ori = gradients(luminance(px))
    response = np.where(mag > threshold, mag, 0.0)
    gid = _link_groups(response, ori, math.pi / 4.0)
    return EdgeMap(response, ori, gid)


def _require_inside(box: BBox, shape: tuple[int, int], what: str) -> None:
    h, w = shape
    if box.x < 0 or box.y < 0 or box.x + box.w > w or box.y + box.h > h:
        raise ValueError(f"{what} must lie inside the {w}x{h} patch")


def suppress_background(
    edges: EdgeMap, target_box: BBox, margin: float, weight: float = 0.0
) -> EdgeMap:
    """Scale down every contour segment that reaches the patch border.

    Groups with any pixel closer than `margin` to the border get their
    responses multiplied by `weight` (default 0, full suppression); pixels
    whose response drops to zero lose their group label. target_box is the
    expected target location and is validated against the patch bounds.
    """
    if not 0.0 <= weight < 1.0:
        raise ValueError("weight must lie in [0, 1)")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    _require_inside(target_box, edges.shape, "target_box")

    h, w = edges.shape
    rows = np.arange(h)
    cols = np.arange(w)
    near_r = (rows < margin) | (h - 1 - rows < margin)
    near_c = (cols < margin) | (w - 1 - cols < margin)
    border = near_r[:, None] | near_c[None, :]
    flagged = np.unique(edges.group_id[border & (edges.group_id > 0)])
    if flagged.size == 0:
        return EdgeMap(edges.response.copy(), edges.orientation.copy(), edges.group_id.copy())

    hit = np.isin(edges.group_id, flagged)
    response = edges.response.copy()
    response[hit] *= weight
    gid = np.where(response > 0.0, edges.group_id, 0).astype(np.int32)
    return EdgeMap(response, edges.orientation.copy(), gid)


def _group_stats(edges: EdgeMap):
    """Per-group response totals and pixel-extent bounds, indexed by group id."""
    gid = edges.group_id
    n = int(gid.max())
    mask = gid > 0
    ids = gid[mask]
    rows, cols = np.nonzero(mask)
    total = np.bincount(ids, weights=edges.response[mask], minlength=n + 1)
    rmin = np.full(n + 1, np.iinfo(np.int64).max, dtype=np.int64)
    cmin = np.full(n + 1, np.iinfo(np.int64).max, dtype=np.int64)
    rmax = np.full(n + 1, -1, dtype=np.int64)
    cmax = np.full(n + 1, -1, dtype=np.int64)
    np.minimum.at(rmin, ids, rows)
    np.minimum.at(cmin, ids, cols)
    np.maximum.at(rmax, ids, rows)
    np.maximum.at(cmax, ids, cols)
    present = np.zeros(n + 1, dtype=bool)
    present[ids] = True
    return present, total, rmin, rmax, cmin, cmax


def contour_affinity(edges: EdgeMap, box: BBox) -> np.ndarray:
    """Binary per-pixel weight: 1 on segments wholly inside the box, else 0."""
    _require_inside(box, edges.shape, "box")
    present, _, rmin, rmax, cmin, cmax = _group_stats(edges)
    inside = (
        present
        & (cmin >= box.x)
        & (cmax < box.x + box.w)
        & (rmin >= box.y)
        & (rmax < box.y + box.h)
    )
    inside[0] = False
    return inside[edges.group_id].astype(np.float64)


def _pixel_range(lo: float, size: float, limit: int) -> tuple[int, int]:
    # integer pixel indices p with lo <= p < lo + size
    start = int(np.ceil(lo))
    stop = int(np.ceil(lo + size))
    return max(start, 0), min(stop, limit)


def score_box(box: BBox, edges: EdgeMap, c: np.ndarray, kappa: float) -> float:
    """Edge-content score of one box.

    Sum of affinity-weighted responses over the box, minus the raw response
    mass in the centered half-size region, divided by 2*(w + h)^kappa.
    """
    _require_inside(box, edges.shape, "box")
    h, w = edges.shape
    r0, r1 = _pixel_range(box.y, box.h, h)
    c0, c1 = _pixel_range(box.x, box.w, w)
    weighted = 0.0
    if r0 < r1 and c0 < c1:
        weighted = float(np.sum(c[r0:r1, c0:c1] * edges.response[r0:r1, c0:c1]))
    ir0, ir1 = _pixel_range(box.y + box.h / 4.0, box.h / 2.0, h)
    ic0, ic1 = _pixel_range(box.x + box.w / 4.0, box.w / 2.0, w)
    inner = 0.0
    if ir0 < ir1 and ic0 < ic1:
        inner = float(np.sum(edges.response[ir0:ir1, ic0:ic1]))
    return (weighted - inner) / (2.0 * (box.w + box.h) ** kappa)


def _candidate_grid(prev_box: BBox, cfg: ProposalConfig, w: int, h: int) -> np.ndarray:
    """Enumerate (x, y, w, h) candidates around prev_box that fit the patch."""
    cx0, cy0 = prev_box.center
    step_x = max(cfg.step_fraction * prev_box.w, 1.0)
    step_y = max(cfg.step_fraction * prev_box.h, 1.0)
    rows = []
    for s in cfg.scale_factors:
        for a in cfg.aspect_factors:
            bw = prev_box.w * s * math.sqrt(a)
            bh = prev_box.h * s / math.sqrt(a)
            if bw > w or bh > h:
                continue
            kx_lo = math.ceil((bw / 2.0 - cx0) / step_x - 1e-9)
            kx_hi = math.floor((w - bw / 2.0 - cx0) / step_x + 1e-9)
            ky_lo = math.ceil((bh / 2.0 - cy0) / step_y - 1e-9)
            ky_hi = math.floor((h - bh / 2.0 - cy0) / step_y + 1e-9)
            if kx_lo > kx_hi or ky_lo > ky_hi:
                continue
            cxs = cx0 + np.arange(kx_lo, kx_hi + 1) * step_x
            cys = cy0 + np.arange(ky_lo, ky_hi + 1) * step_y
            gx, gy = np.meshgrid(cxs, cys)
            block = np.stack(
                [
                    gx.ravel() - bw / 2.0,
                    gy.ravel() - bh / 2.0,
                    np.full(gx.size, bw),
                    np.full(gx.size, bh),
                ],
                axis=1,
            )
            rows.append(block)
    if not rows:
        return np.empty((0, 4))
    return np.concatenate(rows, axis=0)


def _score_candidates(boxes: np.ndarray, edges: EdgeMap, kappa: float) -> np.ndarray:
    """Vectorized score_box over many candidates sharing one edge map."""
    n = boxes.shape[0]
    if n == 0:
        return np.empty(0)
    h, w = edges.shape
    present, total, rmin, rmax, cmin, cmax = _group_stats(edges)
    x, y, bw, bh = boxes[:, 0], boxes[:, 1], boxes[:, 2], boxes[:, 3]

    inside = (
        present[None, :]
        & (cmin[None, :] >= x[:, None])
        & (cmax[None, :] < (x + bw)[:, None])
        & (rmin[None, :] >= y[:, None])
        & (rmax[None, :] < (y + bh)[:, None])
    )
    inside[:, 0] = False
    weighted = inside.astype(np.float64) @ total

    integral = np.zeros((h + 1, w + 1))
    integral[1:, 1:] = np.cumsum(np.cumsum(edges.response, axis=0), axis=1)
    ir0 = np.clip(np.ceil(y + bh / 4.0).astype(np.int64), 0, h)
    ir1 = np.clip(np.ceil(y + 3.0 * bh / 4.0).astype(np.int64), 0, h)
    ic0 = np.clip(np.ceil(x + bw / 4.0).astype(np.int64), 0, w)
    ic1 = np.clip(np.ceil(x + 3.0 * bw / 4.0).astype(np.int64), 0, w)
    ir1 = np.maximum(ir1, ir0)
    ic1 = np.maximum(ic1, ic0)
    inner = (
        integral[ir1, ic1] - integral[ir0, ic1] - integral[ir1, ic0] + integral[ir0, ic0]
    )
    return (weighted - inner) / (2.0 * (bw + bh) ** kappa)


def _iou_many(box: np.ndarray, others: np.ndarray) -> np.ndarray:
    ix = np.minimum(box[0] + box[2], others[:, 0] + others[:, 2]) - np.maximum(
        box[0], others[:, 0]
    )
    iy = np.minimum(box[1] + box[3], others[:, 1] + others[:, 3]) - np.maximum(
        box[1], others[:, 1]
    )
    inter = np.clip(ix, 0.0, None) * np.clip(iy, 0.0, None)
    union = box[2] * box[3] + others[:, 2] * others[:, 3] - inter
    return inter / union


def generate_proposals(patch: Patch, prev_box: BBox, cfg: ProposalConfig) -> list[Proposal]:
    """Score a candidate grid around prev_box and keep the NMS survivors.

    Candidates are translations (step = step_fraction * previous size) and
    scale/aspect perturbations of prev_box, scored on the background-
    suppressed edge map. Non-positive scores are dropped, greedy NMS runs
    in score order, and at most max_proposals survive, scores descending.
    """
    px = np.asarray(patch.pixels)
    h, w = px.shape[0], px.shape[1]
    _require_inside(prev_box, (h, w), "prev_box")

    edges = edge_map(patch, cfg.edge_threshold)
    edges = suppress_background(edges, prev_box, cfg.border_margin, cfg.border_weight)

    boxes = _candidate_grid(prev_box, cfg, w, h)
    scores = _score_candidates(boxes, edges, cfg.kappa)
    keep = scores > 0.0
    boxes, scores = boxes[keep], scores[keep]
    if boxes.shape[0] == 0:
        return []

    order = np.argsort(-scores, kind="stable")
    kept: list[int] = []
    kept_boxes = np.empty((0, 4))
    for i in order:
        if kept:
            if np.any(_iou_many(boxes[i], kept_boxes) > cfg.nms_iou):
                continue
        kept.append(int(i))
        kept_boxes = np.vstack([kept_boxes, boxes[i]])
        if len(kept) == cfg.max_proposals:
            break
    return [
        Proposal(BBox(*(float(v) for v in boxes[i])), edge_score=float(scores[i]))
        for i in kept
    ]


def iou_prefilter(proposals: list[Proposal], anchor: BBox, low: float, high: float) -> list[Proposal]:
    """Keep proposals whose IoU with the anchor lies in [low, high]."""
    if not 0.0 <= low <= high <= 1.0:
        raise ValueError("need 0 <= low <= high <= 1")
    return [p for p in proposals if low <= iou(p.box, anchor) <= high]
