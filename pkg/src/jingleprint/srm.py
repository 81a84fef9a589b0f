"""Statistical Region Merging on single-channel 8-bit rasters.

Adjacent pixel pairs (4-connectivity) are ordered by absolute grey
difference with a stable 256-bucket sort and replayed through a
union-find forest; two regions merge when the gap between their means is
within the sum of their statistical bounds ``b(R)``.

The merge loop is compiled with numba when it is installed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .frameio import GrayFrame
from .preprocess import QuantizedFrame

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


@dataclass(frozen=True)
class SrmParams:
    """Merging parameters.

    Parameters
    ----------
    q : float
        Granularity. Larger values give more, smaller regions.
    g : int
        Number of grey levels of the input.
    delta : float or None
        Confidence term; ``None`` means ``1 / (6 |I|^2)`` for an image of
        ``|I|`` pixels.
    quadrature : bool
        Combine bounds as ``sqrt(b^2 + b'^2)`` instead of ``b + b'``.
    """

    q: float = 32.0
    g: int = 256
    delta: float | None = None
    quadrature: bool = False

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.g < 1:
            raise ValueError(f"g must be positive, got {self.g}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    def resolve_delta(self, n_pixels: int) -> float:
        if self.delta is not None:
            return self.delta
        return 1.0 / (6.0 * n_pixels * n_pixels)


@dataclass(frozen=True, eq=False)
class RegionMap:
    labels: np.ndarray          # (height, width) int32, dense ids in first-touch order
    region_size: np.ndarray     # int64 per region id
    region_mean: np.ndarray     # float64 per region id

    @property
    def region_count(self) -> int:
        return len(self.region_size)

    def partition(self) -> frozenset:
        """The labelling as a set of pixel-index sets, for label-free comparison."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.cumsum(self.region_size)[:-1]
        return frozenset(frozenset(chunk.tolist()) for chunk in np.split(order, bounds))

    def mean_image(self) -> np.ndarray:
        """Each pixel painted with its region's mean grey, rounded to uint8."""
        means = np.clip(np.floor(self.region_mean + 0.5), 0, 255).astype(np.uint8)
        return means[self.labels]


def pair_gradient(p: int, p2: int) -> int:
    return abs(int(p2) - int(p))


def region_bound(size: int, n_pixels: int, params: SrmParams) -> float:
    """``b(R) = g sqrt((min(g, |R|) ln(|R| + 1) + ln(1/delta)) / (2 Q |R|))``."""
    log_inv_delta = -math.log(params.resolve_delta(n_pixels))
    g = params.g
    return g * math.sqrt((min(g, size) * math.log(size + 1) + log_inv_delta)
                         / (2.0 * params.q * size))


@lru_cache(maxsize=32)
def _bound_table(n_pixels: int, params: SrmParams) -> np.ndarray:
    # Computed with the scalar routine so the table and merge_predicate agree bit for bit.
    table = np.empty(n_pixels + 1, dtype=np.float64)
    table[0] = np.inf
    for size in range(1, n_pixels + 1):
        table[size] = region_bound(size, n_pixels, params)
    table.flags.writeable = False
    return table


def merge_threshold(size_a: int, size_b: int, n_pixels: int, params: SrmParams) -> float:
    ba = region_bound(size_a, n_pixels, params)
    bb = region_bound(size_b, n_pixels, params)
    if params.quadrature:
        return math.sqrt(ba * ba + bb * bb)
    return ba + bb


def merge_predicate(region: tuple[int, float], other: tuple[int, float],
                    n_pixels: int, params: SrmParams) -> bool:
    """True when two regions, given as ``(size, mean)``, should merge."""
    (size_a, mean_a), (size_b, mean_b) = region, other
    if size_a < 1 or size_b < 1:
        raise ValueError("regions must be non-empty")
    return abs(mean_b - mean_a) <= merge_threshold(size_a, size_b, n_pixels, params)


def sorted_pairs(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """4-connected pixel pairs in ascending gradient order.

    Construction order is row-major over the first pixel, horizontal pair
    before vertical pair; the sort is stable so that order breaks ties.
    """
    h, w = values.shape
    idx = np.arange(h * w, dtype=np.int64).reshape(h, w)
    first = np.stack([idx, idx], axis=-1)
    second = np.stack([idx + 1, idx + w], axis=-1)
    valid = np.ones((h, w, 2), dtype=bool)
    valid[:, w - 1, 0] = False
    valid[h - 1, :, 1] = False
    p1 = first[valid]
    p2 = second[valid]
    flat = values.ravel().astype(np.int16)
    grad = np.abs(flat[p2] - flat[p1]).astype(np.uint8)
    # numpy radix-sorts stable 8-bit keys: a counting sort over 256 buckets.
    order = np.argsort(grad, kind="stable")
    return p1[order], p2[order]


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _merge_pairs(p1, p2, values, bound, quadrature):
    n = values.shape[0]
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    total = values.astype(np.int64)
    for e in range(p1.shape[0]):
        a = _find(parent, p1[e])
        b = _find(parent, p2[e])
        if a == b:
            continue
        ba = bound[size[a]]
        bb = bound[size[b]]
        if quadrature:
            thr = np.sqrt(ba * ba + bb * bb)
        else:
            thr = ba + bb
        if abs(total[b] / size[b] - total[a] / size[a]) <= thr:
            if size[a] < size[b]:
                a, b = b, a
            parent[b] = a
            size[a] += size[b]
            total[a] += total[b]
    for i in range(n):
        parent[i] = _find(parent, i)
    return parent


def _as_values(frame) -> np.ndarray:
    if isinstance(frame, QuantizedFrame):
        return frame.gray()
    if isinstance(frame, GrayFrame):
        return frame.luma
    values = np.asarray(frame)
    if values.ndim != 2:
        raise ValueError("expected a 2-D raster")
    return values.astype(np.uint8)


def region_map_from_roots(roots: np.ndarray, values: np.ndarray) -> RegionMap:
    """Build a :class:`RegionMap` from any per-pixel region key.

    Ids are assigned in order of each region's first pixel (row-major).
    """
    flat = values.ravel()
    uniq, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(len(uniq), dtype=np.int32)
    labels = rank[inverse.ravel()]
    sizes = np.bincount(labels, minlength=len(uniq)).astype(np.int64)
    sums = np.bincount(labels, weights=flat.astype(np.float64), minlength=len(uniq))
    labels = labels.reshape(values.shape)
    labels.flags.writeable = False
    return RegionMap(labels, sizes, sums / sizes)


def segment(frame, params: SrmParams = SrmParams()) -> RegionMap:
    """Segment a grey frame.

    ``frame`` may be a :class:`GrayFrame`, a :class:`QuantizedFrame` (its
    buckets are rescaled onto 0..255 first) or a 2-D uint8 array.
    """
    values = _as_values(frame)
    if values.size == 0:
        raise ValueError("cannot segment an empty frame")
    n = values.size
    p1, p2 = sorted_pairs(values)
    bound = _bound_table(n, params)
    roots = _merge_pairs(p1, p2, values.ravel(), bound, params.quadrature)
    return region_map_from_roots(roots, values)
