"""Smoothing and grey-level quantisation ahead of segmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .frameio import GrayFrame

DEFAULT_N_COLORS = 64


@dataclass(frozen=True, eq=False)
class QuantizedFrame:
    """Per-pixel bucket indices in ``[0, n_colors)``."""

    buckets: np.ndarray
    n_colors: int

    @property
    def width(self) -> int:
        return self.buckets.shape[1]

    @property
    def height(self) -> int:
        return self.buckets.shape[0]

    def gray(self) -> np.ndarray:
        """Buckets mapped back onto the 0..255 scale (``bucket * 256 // n_colors``)."""
        return (self.buckets.astype(np.int32) * 256 // self.n_colors).astype(np.uint8)

    def histogram(self) -> np.ndarray:
        return np.bincount(self.buckets.ravel(), minlength=self.n_colors)


def median_filter_3x3(frame: GrayFrame) -> GrayFrame:
    """3x3 median with replicated borders."""
    out = ndimage.median_filter(frame.luma, size=3, mode="nearest")
    return GrayFrame(out, frame.index)


def quantize(frame: GrayFrame, n_colors: int = DEFAULT_N_COLORS) -> QuantizedFrame:
    """Map luma onto ``n_colors`` equal-width buckets: ``floor(luma * n / 256)``."""
    if not 1 <= n_colors <= 256:
        raise ValueError(f"n_colors must be in [1, 256], got {n_colors}")
    buckets = (frame.luma.astype(np.int32) * n_colors) >> 8
    buckets = buckets.astype(np.uint8)
    buckets.flags.writeable = False
    return QuantizedFrame(buckets, n_colors)
