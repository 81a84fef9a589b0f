"""Colour coherence vectors over SRM regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import QuantizedFrame
from .srm import RegionMap


def default_tau(n_pixels: int) -> int:
    """1% of the frame, at least one pixel."""
    return max(1, n_pixels // 100)


@dataclass(frozen=True, eq=False)
class CcvSignature:
    """Coherent (alpha) and incoherent (beta) pixel counts per bucket.

    ``pairs`` is an ``(n_colors, 2)`` int64 array.
    """

    pairs: np.ndarray

    def __post_init__(self):
        pairs = np.array(self.pairs, dtype=np.int64).reshape(-1, 2)
        if (pairs < 0).any():
            raise ValueError("coherence counts must be non-negative")
        pairs.flags.writeable = False
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_colors(self) -> int:
        return len(self.pairs)

    @property
    def pixel_total(self) -> int:
        return int(self.pairs.sum())

    @property
    def alpha(self) -> np.ndarray:
        return self.pairs[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.pairs[:, 1]

    def __eq__(self, other):
        if not isinstance(other, CcvSignature):
            return NotImplemented
        return np.array_equal(self.pairs, other.pairs)

    __hash__ = None


def compute_ccv(qf: QuantizedFrame, rm: RegionMap, tau: int) -> CcvSignature:
    """Count each pixel as coherent when its region holds more than ``tau`` pixels."""
    if qf.buckets.shape != rm.labels.shape:
        raise ValueError(f"dimension mismatch: frame {qf.buckets.shape}, "
                         f"regions {rm.labels.shape}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    buckets = qf.buckets.ravel().astype(np.int64)
    coherent = (rm.region_size > tau)[rm.labels.ravel()]
    alpha = np.bincount(buckets[coherent], minlength=qf.n_colors)
    beta = np.bincount(buckets[~coherent], minlength=qf.n_colors)
    return CcvSignature(np.stack([alpha, beta], axis=1))


def ccv_similarity(a: CcvSignature, b: CcvSignature) -> float:
    """One minus the L1 distance of the coherence pairs over their total mass."""
    if a.n_colors != b.n_colors:
        raise ValueError(f"bucket count mismatch: {a.n_colors} vs {b.n_colors}")
    if a.pixel_total != b.pixel_total:
        raise ValueError(f"frame size mismatch: {a.pixel_total} vs {b.pixel_total} pixels")
    mass = a.pixel_total + b.pixel_total
    if mass == 0:
        return 1.0
    return 1.0 - float(np.abs(a.pairs - b.pairs).sum()) / mass
