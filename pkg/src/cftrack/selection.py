"""Adaptive proposal selection by color similarity.

Each proposal is compared against two reference appearances: the target
annotated in the first frame and the prediction from the previous frame.
A per-sequence contamination counter decides how much to trust each
reference: the longer the tracker has been unconfident, the more weight
shifts from the previous instance back to the initial one. The top
fraction of proposals by the combined similarity survives, and the final
state is a damped blend of the filter prediction and the best proposal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import BBox, Patch, rgb_to_hsv
from .proposals import Proposal

__all__ = [
    "HsvHistogram",
    "Instance",
    "SelectorConfig",
    "SelectorState",
    "TargetState",
    "hsv_bin",
    "color_histogram",
    "bhattacharyya",
    "update_mean_confidence",
    "update_contamination",
    "proposal_score",
    "select_proposals",
    "fine_tune_state",
]

_MODES = ("both", "init", "prev")


@dataclass(frozen=True)
class TargetState:
    """Tracker output per frame: center location and size in pixels."""

    center: tuple[float, float]
    size: tuple[float, float]

    def __post_init__(self):
        if self.size[0] <= 0 or self.size[1] <= 0:
            raise ValueError("target size must be positive")

    @property
    def box(self) -> BBox:
        return BBox.from_center(self.center[0], self.center[1], self.size[0], self.size[1])


@dataclass(frozen=True)
class HsvHistogram:
    """256-bin quantized HSV histogram with its source pixel count."""

    bins: np.ndarray
    pixel_count: int

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.int64)
        if b.shape != (256,) or np.any(b < 0):
            raise ValueError("histogram needs 256 non-negative counts")
        if self.pixel_count < 1:
            raise ValueError("pixel_count must be positive")
        if int(b.sum()) != self.pixel_count:
            raise ValueError("bin counts must sum to pixel_count")
        object.__setattr__(self, "bins", b)


@dataclass(frozen=True)
class Instance:
    """A reference target appearance: its patch, histogram, box and frame."""

    patch: Patch
    histogram: HsvHistogram
    box: BBox
    frame_index: int


@dataclass(frozen=True)
class SelectorConfig:
    """Tunable selection parameters (runtime state lives in SelectorState)."""

    eta: float = 0.01
    eta_prime: float = 0.60
    alpha_d: float = 0.15
    keep_fraction: float = 0.5
    beta: float = 0.70
    instance_mode: str = "both"

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")
        if self.eta_prime < 0.0:
            raise ValueError("eta_prime must be non-negative")
        if self.alpha_d < 0.0:
            raise ValueError("alpha_d must be non-negative")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.instance_mode not in _MODES:
            raise ValueError(f"instance_mode must be one of {_MODES}")


@dataclass
class SelectorState:
    """Selection memory mutated once per frame by its owning tracker."""

    eta: float = 0.01
    eta_prime: float = 0.60
    alpha_d: float = 0.15
    keep_fraction: float = 0.5
    beta: float = 0.70
    instance_mode: str = "both"
    f_mean: float | None = None
    delta: int = 0
    anchor_frame: int = 0
    instance_init: Instance | None = None
    instance_prev: Instance | None = None

    @classmethod
    def from_config(cls, cfg: SelectorConfig) -> "SelectorState":
        return cls(
            eta=cfg.eta,
            eta_prime=cfg.eta_prime,
            alpha_d=cfg.alpha_d,
            keep_fraction=cfg.keep_fraction,
            beta=cfg.beta,
            instance_mode=cfg.instance_mode,
        )


def hsv_bin(hsv) -> np.ndarray | int:
    """Quantize HSV triples (channels scaled to [0, 255]) into 256 bins.

    Hue contributes the top 4 bits (16 levels), saturation the next 2 and
    value the last 2 (4 levels each): bin = 16*floor(h/16) + 4*floor(s/64)
    + floor(v/64).
    """
    a = np.asarray(hsv, dtype=np.float64)
    if a.shape[-1] != 3:
        raise ValueError("expected HSV triples along the last axis")
    if np.any(a < 0.0) or np.any(a > 255.0):
        raise ValueError("HSV channels must lie in [0, 255]")
    h, s, v = a[..., 0], a[..., 1], a[..., 2]
    idx = (16 * (h // 16) + 4 * (s // 64) + v // 64).astype(np.int64)
    if idx.ndim == 0:
        return int(idx)
    return idx


def color_histogram(patch: Patch) -> HsvHistogram:
    """Histogram of quantized HSV bins over all patch pixels."""
    px = np.asarray(patch.pixels)
    if px.size == 0:
        raise ValueError("cannot histogram an empty patch")
    hsv = rgb_to_hsv(px) * 255.0
    idx = hsv_bin(hsv)
    counts = np.bincount(np.asarray(idx).ravel(), minlength=256)
    return HsvHistogram(counts, int(px.shape[0] * px.shape[1]))


def bhattacharyya(h_i: HsvHistogram, h_p: HsvHistogram) -> float:
    """Bhattacharyya coefficient of the two normalized histograms, in [0, 1]."""
    if h_i.pixel_count <= 0 or h_p.pixel_count <= 0:
        raise ValueError("histograms need positive pixel counts")
    p = h_i.bins / h_i.pixel_count
    q = h_p.bins / h_p.pixel_count
    return float(np.sum(np.sqrt(p * q)))


def update_mean_confidence(state: SelectorState, f_max: float) -> float:
    """Fold one frame's peak response into the running mean confidence.

    The first observation initializes the mean; afterwards it moves by the
    learning rate eta.
    """
    if f_max < 0.0:
        raise ValueError("f_max must be non-negative")
    if state.f_mean is None:
        state.f_mean = float(f_max)
    else:
        state.f_mean = (1.0 - state.eta) * state.f_mean + state.eta * float(f_max)
    return state.f_mean


def update_contamination(state: SelectorState, f_max_tmp: float, frame_index: int) -> tuple[int, int]:
    """Advance the contaminated-frame counter from one filter peak.

    A peak strictly below eta_prime times the running mean marks the frame
    contaminated and increments delta; otherwise delta resets to 0 and the
    confident frame becomes the new anchor. Equality counts as confident.
    """
    if f_max_tmp < 0.0:
        raise ValueError("f_max_tmp must be non-negative")
    if state.f_mean is None:
        raise ValueError("mean confidence not initialized")
    if f_max_tmp < state.eta_prime * state.f_mean:
        state.delta += 1
    else:
        state.delta = 0
        state.anchor_frame = int(frame_index)
    return state.delta, state.anchor_frame


def proposal_score(sim_init: float, sim_prev: float, delta: int, alpha_d: float) -> float:
    """Blend the two instance similarities by contamination age.

    delta = 0 trusts the previous instance alone; as delta grows the weight
    decays exponentially toward the initial instance.
    """
    if not 0.0 <= sim_init <= 1.0 or not 0.0 <= sim_prev <= 1.0:
        raise ValueError("similarities must lie in [0, 1]")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if alpha_d < 0.0:
        raise ValueError("alpha_d must be non-negative")
    w_prev = math.exp(-alpha_d * delta)
    return (1.0 - w_prev) * sim_init + w_prev * sim_prev


def select_proposals(proposals: list[Proposal], state: SelectorState) -> list[Proposal]:
    """Rank proposals by combined similarity and keep the top fraction.

    Ties break by higher edge score, then input order. Exactly
    ceil(keep_fraction * N) proposals come back, scores non-increasing.
    """
    if not proposals:
        return []
    for p in proposals:
        if p.sim_init is None or p.sim_prev is None:
            raise ValueError("proposal similarities must be computed before selection")
        if state.instance_mode == "init":
            p.combined_score = float(p.sim_init)
        elif state.instance_mode == "prev":
            p.combined_score = float(p.sim_prev)
        else:
            p.combined_score = proposal_score(
                p.sim_init, p.sim_prev, state.delta, state.alpha_d
            )
    order = sorted(
        range(len(proposals)),
        key=lambda i: (-proposals[i].combined_score, -proposals[i].edge_score, i),
    )
    count = math.ceil(state.keep_fraction * len(proposals))
    return [proposals[i] for i in order[:count]]


def fine_tune_state(
    initial_center: tuple[float, float],
    prev_size: tuple[float, float],
    proposal: Proposal,
    beta: float,
) -> TargetState:
    """Damped blend of the filter prediction with the chosen proposal.

    Center and size each move a fraction beta of the way from the initial
    prediction (center) / previous size toward the proposal's box, which
    must be in frame coordinates.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    pcx, pcy = proposal.box.center
    cx = initial_center[0] + beta * (pcx - initial_center[0])
    cy = initial_center[1] + beta * (pcy - initial_center[1])
    w = prev_size[0] + beta * (proposal.box.w - prev_size[0])
    h = prev_size[1] + beta * (proposal.box.h - prev_size[1])
    return TargetState((cx, cy), (w, h))
