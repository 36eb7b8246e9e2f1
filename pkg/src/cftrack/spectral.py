"""Fourier-domain correlation filtering.

Training solves a ridge regression over every cyclic shift of the base
sample in closed form: the kernel matrix of cyclic shifts is circulant,
so the dense solve diagonalizes into an element-wise division in the
Fourier domain. Detection correlates a probe against the stored
appearance model and reads the displacement off the response peak.

Shift convention: the kernel-correlation entry at (dy, dx) compares the
model with the probe pulled back by (dy, dx). A probe whose content is
the model rolled forward by (dy, dx) therefore produces a response peak
at exactly (dy, dx), which the tracker reads as target displacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FeatureStack",
    "CorrelationModel",
    "ResponseMap",
    "fft2",
    "ifft2",
    "gaussian_kernel_correlation",
    "gaussian_label",
    "train_filter",
    "response_map",
    "update_model",
    "fuse_responses",
]


@dataclass(frozen=True)
class FeatureStack:
    """A stack of same-size 2D feature channels, shape (C, H, W)."""

    data: np.ndarray
    cell_size: int = 1

    def __post_init__(self):
        arr = self.data
        if isinstance(arr, (list, tuple)):
            arr = np.stack([np.asarray(c, dtype=np.float64) for c in arr])
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ValueError("feature stack needs shape (channels, height, width)")
        if self.cell_size < 1:
            raise ValueError("cell_size must be at least 1")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> list[np.ndarray]:
        return [self.data[c] for c in range(self.data.shape[0])]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ResponseMap:
    """A 2D correlation response with its peak cached."""

    values: np.ndarray
    peak_value: float
    peak_pos: tuple[int, int]

    @classmethod
    def from_values(cls, values: np.ndarray) -> "ResponseMap":
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("response map must be 2D")
        flat = int(np.argmax(v))  # first maximum in row-major order
        pos = (flat // v.shape[1], flat % v.shape[1])
        return cls(v, float(v[pos]), pos)


@dataclass(frozen=True)
class CorrelationModel:
    """Dual coefficients plus the running appearance model they were fit to."""

    alpha_hat: np.ndarray
    model_x: FeatureStack
    sigma: float
    lambda_: float
    label_hat: np.ndarray

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.lambda_ <= 0:
            raise ValueError("lambda must be positive")
        grid = self.model_x.data.shape[1:]
        if self.alpha_hat.shape != grid or self.label_hat.shape != grid:
            raise ValueError("alpha_hat/label_hat must match the feature grid")


def fft2(a: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2D DFT."""
    return np.fft.fft2(np.asarray(a))


def ifft2(a: np.ndarray) -> np.ndarray:
    """Inverse 2D DFT, real part only."""
    return np.fft.ifft2(np.asarray(a)).real


def gaussian_kernel_correlation(x: FeatureStack, z: FeatureStack, sigma: float) -> np.ndarray:
    """Gaussian kernel evaluated against every cyclic shift of the probe.

    Entry (dy, dx) equals exp(-||x - roll(z, -(dy, dx))||^2 / (sigma^2 * W*H*C)),
    computed for all shifts at once through the cross-correlation theorem.
    The squared distance is clamped at 0 before the exponential to absorb
    FFT round-off, so the output lies in (0, 1].
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if x.data.shape != z.data.shape:
        raise ValueError(
            f"feature dimensions differ: {x.data.shape} vs {z.data.shape}"
        )
    xf = np.fft.fft2(x.data, axes=(1, 2))
    zf = np.fft.fft2(z.data, axes=(1, 2))
    cross = np.fft.ifft2(np.conj(xf) * zf, axes=(1, 2)).real.sum(axis=0)
    xx = float(np.sum(x.data * x.data))
    zz = float(np.sum(z.data * z.data))
    dist = np.maximum(xx + zz - 2.0 * cross, 0.0)
    return np.exp(-dist / (sigma * sigma * x.data.size))


def gaussian_label(height: int, width: int, sigma: float) -> np.ndarray:
    """Regression target: cyclic 2D Gaussian with its peak at zero shift.

    Offsets wrap, so the label is symmetric under cyclic shifts and its
    spectrum is real. label[0, 0] is exactly 1.
    """
    if height < 1 or width < 1 or sigma <= 0:
        raise ValueError("label needs positive dimensions and bandwidth")
    dy = (np.arange(height) + height // 2) % height - height // 2
    dx = (np.arange(width) + width // 2) % width - width // 2
    return np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma * sigma))


def train_filter(
    x1: FeatureStack, label_hat: np.ndarray, sigma: float, lambda_: float
) -> CorrelationModel:
    """Closed-form dual solution: alpha_hat = label_hat / (fft2(k_auto) + lambda)."""
    label_hat = np.asarray(label_hat, dtype=np.complex128)
    if label_hat.shape != x1.data.shape[1:]:
        raise ValueError("label dimensions must match the feature grid")
    k = gaussian_kernel_correlation(x1, x1, sigma)
    denom = np.fft.fft2(k) + lambda_
    if np.any(np.abs(denom) == 0.0):
        raise ArithmeticError("zero denominator while training the filter")
    alpha_hat = label_hat / denom
    return CorrelationModel(alpha_hat, x1, float(sigma), float(lambda_), label_hat)


def response_map(model: CorrelationModel, z: FeatureStack) -> ResponseMap:
    """Correlate a probe against the model and return the dense response."""
    k = gaussian_kernel_correlation(model.model_x, z, model.sigma)
    values = np.fft.ifft2(np.fft.fft2(k) * model.alpha_hat).real
    return ResponseMap.from_values(values)


def update_model(model: CorrelationModel, new_x: FeatureStack, rate: float) -> CorrelationModel:
    """Blend the stored model toward a fresh training on new_x.

    Both the appearance model and the dual coefficients are interpolated
    with the same rate; rate 0 keeps the model, rate 1 replaces it.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"update rate must lie in [0, 1], got {rate}")
    if new_x.data.shape != model.model_x.data.shape:
        raise ValueError("new features must match the model dimensions")
    fresh = train_filter(new_x, model.label_hat, model.sigma, model.lambda_)
    alpha = (1.0 - rate) * model.alpha_hat + rate * fresh.alpha_hat
    blend = (1.0 - rate) * model.model_x.data + rate * new_x.data
    mixed = FeatureStack(blend, cell_size=model.model_x.cell_size)
    return CorrelationModel(alpha, mixed, model.sigma, model.lambda_, model.label_hat)


def fuse_responses(layers, mu) -> ResponseMap:
    """Weighted sum of same-size response layers.

    Callers resample layers to a common grid beforehand; weights are not
    normalized, so scaling all of them scales the output linearly.
    """
    layers = [np.asarray(l, dtype=np.float64) for l in layers]
    weights = [float(m) for m in mu]
    if not layers or len(layers) != len(weights):
        raise ValueError("need equally many layers and weights, at least one")
    shape = layers[0].shape
    for l in layers:
        if l.ndim != 2 or l.shape != shape:
            raise ValueError("all layers must share one 2D shape")
    values = np.zeros(shape, dtype=np.float64)
    for w, l in zip(weights, layers):
        values += w * l
    return ResponseMap.from_values(values)
