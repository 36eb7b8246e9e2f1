"""Shared helpers for building tiny frames, patches and edge maps."""

import numpy as np
import pytest

from cftrack.imaging import BBox, Frame, Patch


def make_frame(pixels, index=0):
    return Frame(np.asarray(pixels, dtype=np.float64), index)


def solid_frame(w, h, color, index=0):
    px = np.empty((h, w, 3), dtype=np.float64)
    px[:, :] = color
    return Frame(px, index)


def make_patch(pixels, box=None):
    arr = np.asarray(pixels, dtype=np.float64)
    if box is None:
        box = BBox(0.0, 0.0, arr.shape[1], arr.shape[0])
    return Patch(arr, box)


def gray_patch(gray2d, box=None):
    arr = np.asarray(gray2d, dtype=np.float64)
    return make_patch(np.repeat(arr[:, :, None], 3, axis=2), box)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
