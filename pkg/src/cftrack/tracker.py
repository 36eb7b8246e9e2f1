"""Per-frame tracking pipeline.

Each step localizes the target with the correlation filter, generates
edge-based proposals in a detection window around the new location,
pre-filters them by overlap, keeps the most color-similar fraction,
re-scores the survivors with the filter, and blends the best one into
the final state, which then drives the model and instance updates.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .features import FeatureConfig, extract_features
from .imaging import BBox, Frame, Patch, crop
from .proposals import Proposal, ProposalConfig, generate_proposals, iou_prefilter
from .selection import (
    Instance,
    SelectorConfig,
    SelectorState,
    TargetState,
    bhattacharyya,
    color_histogram,
    fine_tune_state,
    select_proposals,
    update_contamination,
    update_mean_confidence,
)
from .spectral import (
    CorrelationModel,
    FeatureStack,
    fft2,
    gaussian_label,
    response_map,
    train_filter,
    update_model,
)

__all__ = [
    "TargetState",
    "TrackerConfig",
    "TrackerHandle",
    "FrameTiming",
    "StepInfo",
    "SequenceResult",
    "init",
    "step",
    "run_sequence",
]

_STAGES = (
    "locate",
    "contamination",
    "proposals",
    "prefilter",
    "selection",
    "proposal_eval",
    "finetune",
    "update",
)


@dataclass(frozen=True)
class TrackerConfig:
    s_d: float = 1.40  # detection window is s_d times the target size
    lambda_: float = 1e-4
    sigma: float = 0.5
    update_rate: float = 0.02
    template_size: int = 96
    label_sigma_factor: float = 0.1  # label bandwidth = factor * sqrt(grid area)
    response_gate: float = 0.85  # proposals within this fraction of the best peak stay eligible
    features: FeatureConfig = field(default_factory=FeatureConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)

    def __post_init__(self):
        if self.s_d <= 1.0:
            raise ValueError("s_d must exceed 1")
        if self.lambda_ <= 0.0:
            raise ValueError("lambda must be positive")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.update_rate <= 1.0:
            raise ValueError("update_rate must lie in [0, 1]")
        if self.label_sigma_factor <= 0.0:
            raise ValueError("label_sigma_factor must be positive")
        if not 0.0 < self.response_gate <= 1.0:
            raise ValueError("response_gate must lie in (0, 1]")
        if self.template_size < 2 * self.features.cell_size:
            raise ValueError("template_size must cover at least two feature cells")
        if self.template_size % self.features.cell_size != 0:
            raise ValueError("template_size must be divisible by cell_size")


@dataclass
class FrameTiming:
    """Wall-clock seconds spent in each pipeline stage of one frame."""

    locate: float = 0.0
    contamination: float = 0.0
    proposals: float = 0.0
    prefilter: float = 0.0
    selection: float = 0.0
    proposal_eval: float = 0.0
    finetune: float = 0.0
    update: float = 0.0
    total: float = 0.0

    def stage_sum(self) -> float:
        return sum(getattr(self, name) for name in _STAGES)


@dataclass
class StepInfo:
    """Per-frame diagnostics: boxes are in frame coordinates."""

    initial_center: tuple[float, float]
    kcf_peak: float
    n_candidates: int
    survivor_boxes: list[BBox]
    kept_boxes: list[BBox]
    chosen_box: BBox | None
    chosen_response: float | None
    delta: int
    f_mean: float


@dataclass
class TrackerHandle:
    model: CorrelationModel
    state: TargetState
    selector: SelectorState
    config: TrackerConfig
    frame_index: int
    last_timing: FrameTiming | None = None
    last_info: StepInfo | None = None


@dataclass
class SequenceResult:
    states: list[TargetState]
    timings: list[FrameTiming]
    infos: list[StepInfo] | None
    handle: TrackerHandle


def _window_features(frame: Frame, center, size, cfg: TrackerConfig) -> FeatureStack:
    t = cfg.template_size
    win = BBox.from_center(center[0], center[1], cfg.s_d * size[0], cfg.s_d * size[1])
    return extract_features(crop(frame, win, t, t), cfg.features)


def _instance_at(frame: Frame, box: BBox, frame_index: int) -> Instance:
    pw = max(int(round(box.w)), 1)
    ph = max(int(round(box.h)), 1)
    patch = crop(frame, box, pw, ph)
    return Instance(patch, color_histogram(patch), box, frame_index)


def init(frame: Frame, gt: BBox, cfg: TrackerConfig | None = None) -> TrackerHandle:
    """Train the model on the first frame and seed the selection memory."""
    if cfg is None:
        cfg = TrackerConfig()
    if gt.x < 0 or gt.y < 0 or gt.x + gt.w > frame.width or gt.y + gt.h > frame.height:
        raise ValueError("ground-truth box must lie inside the frame")

    feats = _window_features(frame, gt.center, (gt.w, gt.h), cfg)
    gh, gw = feats.data.shape[1:]
    label = gaussian_label(gh, gw, cfg.label_sigma_factor * math.sqrt(gw * gh))
    model = train_filter(feats, fft2(label), cfg.sigma, cfg.lambda_)
    first_peak = max(response_map(model, feats).peak_value, 0.0)

    selector = SelectorState.from_config(cfg.selector)
    instance = _instance_at(frame, gt, frame.index)
    selector.instance_init = instance
    selector.instance_prev = instance
    selector.anchor_frame = frame.index
    update_mean_confidence(selector, first_peak)

    state = TargetState(gt.center, (gt.w, gt.h))
    return TrackerHandle(model, state, selector, cfg, frame.index)


def _wrapped_displacement(peak: tuple[int, int], shape: tuple[int, int]) -> tuple[int, int]:
    # peaks past the midpoint are negative displacements that wrapped around
    dy = peak[0] - shape[0] if peak[0] > shape[0] / 2 else peak[0]
    dx = peak[1] - shape[1] if peak[1] > shape[1] / 2 else peak[1]
    return dy, dx


def step(handle: TrackerHandle, frame: Frame) -> TargetState:
    """Track one frame; never fails on valid frames, falls back to KCF-only."""
    cfg = handle.config
    if frame.width < 2 or frame.height < 2:
        raise ValueError("frame too small to track")
    selector = handle.selector
    timing = FrameTiming()
    t_begin = time.perf_counter()

    # correlation-filter localization at the previous state
    prev = handle.state
    pw, ph = prev.size
    feats = _window_features(frame, prev.center, prev.size, cfg)
    resp = response_map(handle.model, feats)
    dy, dx = _wrapped_displacement(resp.peak_pos, resp.values.shape)
    cell = cfg.features.cell_size
    cx = prev.center[0] + dx * cell * (cfg.s_d * pw / cfg.template_size)
    cy = prev.center[1] + dy * cell * (cfg.s_d * ph / cfg.template_size)
    f_tmp = max(resp.peak_value, 0.0)
    t_mark = time.perf_counter()
    timing.locate = t_mark - t_begin

    update_contamination(selector, f_tmp, frame.index)
    now = time.perf_counter()
    timing.contamination = now - t_mark
    t_mark = now

    # proposals inside the detection window around the new center
    det_w = max(int(round(cfg.s_d * pw)), 3)
    det_h = max(int(round(cfg.s_d * ph)), 3)
    det_box = BBox.from_center(cx, cy, det_w, det_h)
    det_patch = crop(frame, det_box, det_w, det_h)
    patch_anchor = BBox.from_center(det_w / 2.0, det_h / 2.0, pw, ph)
    raw = generate_proposals(det_patch, patch_anchor, cfg.proposals)
    # shift into frame coordinates for everything downstream
    for p in raw:
        p.box = BBox(p.box.x + det_box.x, p.box.y + det_box.y, p.box.w, p.box.h)
    now = time.perf_counter()
    timing.proposals = now - t_mark
    t_mark = now

    anchor = BBox.from_center(cx, cy, pw, ph)
    survivors = iou_prefilter(raw, anchor, cfg.proposals.iou_low, cfg.proposals.iou_high)
    now = time.perf_counter()
    timing.prefilter = now - t_mark
    t_mark = now

    for p in survivors:
        patch_w = max(int(round(p.box.w)), 1)
        patch_h = max(int(round(p.box.h)), 1)
        hist = color_histogram(crop(frame, p.box, patch_w, patch_h))
        p.sim_init = min(bhattacharyya(hist, selector.instance_init.histogram), 1.0)
        p.sim_prev = min(bhattacharyya(hist, selector.instance_prev.histogram), 1.0)
    kept = select_proposals(survivors, selector)
    now = time.perf_counter()
    timing.selection = now - t_mark
    t_mark = now

    # each proposal is probed with its own padded window resized to the
    # template; peaks compared across window scales drift high because a
    # larger window tolerates the same centering error better, so the peak
    # only gates plausibility and the contour fit decides among the gated
    best: Proposal | None = None
    for p in kept:
        pfeats = _window_features(frame, p.box.center, (p.box.w, p.box.h), cfg)
        p.response = response_map(handle.model, pfeats).peak_value
    if kept:
        gate = cfg.response_gate * max(p.response for p in kept)
        best = max(
            (p for p in kept if p.response >= gate),
            key=lambda p: (p.edge_score, p.response),
        )
    now = time.perf_counter()
    timing.proposal_eval = now - t_mark
    t_mark = now

    if best is not None:
        final = fine_tune_state((cx, cy), prev.size, best, selector.beta)
        f_final = max(best.response, 0.0)
    else:
        final = TargetState((cx, cy), prev.size)
        f_final = f_tmp
    now = time.perf_counter()
    timing.finetune = now - t_mark
    t_mark = now

    new_feats = _window_features(frame, final.center, final.size, cfg)
    handle.model = update_model(handle.model, new_feats, cfg.update_rate)
    selector.instance_prev = _instance_at(frame, final.box, frame.index)
    update_mean_confidence(selector, f_final)
    now = time.perf_counter()
    timing.update = now - t_mark
    timing.total = now - t_begin

    handle.state = final
    handle.frame_index = frame.index
    handle.last_timing = timing
    handle.last_info = StepInfo(
        initial_center=(cx, cy),
        kcf_peak=f_tmp,
        n_candidates=len(raw),
        survivor_boxes=[p.box for p in survivors],
        kept_boxes=[p.box for p in kept],
        chosen_box=best.box if best is not None else None,
        chosen_response=best.response if best is not None else None,
        delta=selector.delta,
        f_mean=selector.f_mean,
    )
    return final


def run_sequence(frames, gt0: BBox, cfg: TrackerConfig | None = None, collect_info: bool = False) -> SequenceResult:
    """Initialize on the first frame, step through the rest.

    Emits one state per frame; the first is the ground truth itself.
    """
    it = iter(frames)
    first = next(it, None)
    if first is None:
        raise ValueError("sequence must contain at least one frame")

    t0 = time.perf_counter()
    handle = init(first, gt0, cfg)
    dt = time.perf_counter() - t0
    states = [handle.state]
    timings = [FrameTiming(update=dt, total=dt)]
    infos: list[StepInfo] = []
    for fr in it:
        step(handle, fr)
        states.append(handle.state)
        timings.append(handle.last_timing)
        if collect_info:
            infos.append(handle.last_info)
    return SequenceResult(states, timings, infos if collect_info else None, handle)
