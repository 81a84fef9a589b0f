"""Harris interest points and their match-ratio similarity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .frameio import GrayFrame

HARRIS_K = 0.04
HARRIS_SIGMA = 1.0
DEFAULT_N_POI = 50
DEFAULT_NMS_RADIUS = 3
BORDER_MARGIN = 3
DEFAULT_THRE_DIST = 4.0
DEFAULT_THRE_HARRIS = 0.1


@dataclass(frozen=True)
class Poi:
    x: int
    y: int
    response: float


@dataclass(frozen=True, eq=False)
class PoiSignature:
    """Points sorted by descending response.

    Stored column-wise: ``xs``/``ys`` int64, ``responses`` float64 already
    rounded to six decimals so text serialisation is lossless.
    """

    xs: np.ndarray
    ys: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        for name, dtype in (("xs", np.int64), ("ys", np.int64), ("responses", np.float64)):
            arr = np.array(getattr(self, name), dtype=dtype).ravel()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not len(self.xs) == len(self.ys) == len(self.responses):
            raise ValueError("xs, ys and responses must have equal length")
        if len(self.responses) > 1 and (np.diff(self.responses) > 0).any():
            raise ValueError("points must be sorted by descending response")

    @classmethod
    def from_points(cls, points) -> "PoiSignature":
        points = list(points)
        return cls([p.x for p in points], [p.y for p in points],
                   [p.response for p in points])

    @classmethod
    def empty(cls) -> "PoiSignature":
        return cls([], [], [])

    def __len__(self) -> int:
        return len(self.xs)

    def __iter__(self):
        for x, y, r in zip(self.xs, self.ys, self.responses):
            yield Poi(int(x), int(y), float(r))

    def __eq__(self, other):
        if not isinstance(other, PoiSignature):
            return NotImplemented
        return (np.array_equal(self.xs, other.xs) and np.array_equal(self.ys, other.ys)
                and np.array_equal(self.responses, other.responses))

    __hash__ = None


def gaussian_kernel(sigma: float) -> np.ndarray:
    radius = max(1, int(math.ceil(3.0 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    return kernel / kernel.sum()


def harris_response(frame: GrayFrame, k: float = HARRIS_K,
                    sigma: float = HARRIS_SIGMA) -> np.ndarray:
    """Harris corner measure ``det(M) - k trace(M)^2``, scaled by its max magnitude.

    Gradients are central differences on edge-replicated borders; the
    structure tensor is smoothed by a normalised Gaussian cut at 3 sigma.
    """
    img = frame.luma.astype(np.float64)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError(f"frame too small for Harris: {img.shape[1]}x{img.shape[0]}")
    padded = np.pad(img, 1, mode="edge")
    ix = (padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5
    iy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5

    kernel = gaussian_kernel(sigma)

    def smooth(a):
        a = ndimage.correlate1d(a, kernel, axis=0, mode="nearest")
        return ndimage.correlate1d(a, kernel, axis=1, mode="nearest")

    sxx, syy, sxy = smooth(ix * ix), smooth(iy * iy), smooth(ix * iy)
    response = sxx * syy - sxy * sxy - k * (sxx + syy) ** 2
    peak = np.abs(response).max()
    if peak > 0:
        response /= peak
    else:
        response[:] = 0.0
    return response


def select_points(response: np.ndarray, n_poi: int, nms_radius: int,
                  border: int = BORDER_MARGIN) -> PoiSignature:
    """Greedy non-maximum suppression over positive responses."""
    if n_poi < 1:
        raise ValueError(f"n_poi must be >= 1, got {n_poi}")
    h, w = response.shape
    allowed = np.zeros_like(response, dtype=bool)
    allowed[border:h - border, border:w - border] = True
    cand = np.flatnonzero((response > 0) & allowed)
    if cand.size == 0:
        return PoiSignature.empty()
    # descending response, row-major index on ties
    order = cand[np.argsort(-response.ravel()[cand], kind="stable")]

    suppressed = np.zeros((h, w), dtype=bool)
    r = nms_radius
    dy, dx = np.mgrid[-r:r + 1, -r:r + 1]
    disk = dx * dx + dy * dy <= r * r
    flat_resp = response.ravel()
    points = []
    for idx in order:
        y, x = divmod(int(idx), w)
        if suppressed[y, x]:
            continue
        points.append(Poi(x, y, float(f"{flat_resp[idx]:.6f}")))
        if len(points) == n_poi:
            break
        y0, y1 = max(0, y - r), min(h, y + r + 1)
        x0, x1 = max(0, x - r), min(w, x + r + 1)
        suppressed[y0:y1, x0:x1] |= disk[y0 - y + r:y1 - y + r, x0 - x + r:x1 - x + r]
    return PoiSignature.from_points(points)


def detect_pois(frame: GrayFrame, n_poi: int = DEFAULT_N_POI,
                nms_radius: int = DEFAULT_NMS_RADIUS, k: float = HARRIS_K,
                sigma: float = HARRIS_SIGMA) -> PoiSignature:
    return select_points(harris_response(frame, k, sigma), n_poi, nms_radius)


def match_points(a: PoiSignature, b: PoiSignature, thre_dist: float = DEFAULT_THRE_DIST,
                 thre_harris: float = DEFAULT_THRE_HARRIS) -> list[tuple[int, int]]:
    """One-to-one greedy matching of ``a`` onto ``b``.

    Walks ``a`` in its stored (descending response) order and takes the
    nearest unused admissible point of ``b``; ties go to the lower index.
    """
    if len(a) == 0 or len(b) == 0:
        return []
    dx = a.xs[:, None] - b.xs[None, :]
    dy = a.ys[:, None] - b.ys[None, :]
    dist = np.sqrt((dx * dx + dy * dy).astype(np.float64))
    ok = (dist < thre_dist) & (np.abs(a.responses[:, None] - b.responses[None, :]) < thre_harris)
    rows = np.flatnonzero(ok.any(axis=1))
    used = np.zeros(len(b), dtype=bool)
    pairs = []
    for i in rows:
        cols = np.flatnonzero(ok[i] & ~used)
        if cols.size == 0:
            continue
        j = int(cols[np.argmin(dist[i, cols])])
        assert not used[j]
        used[j] = True
        pairs.append((int(i), j))
    return pairs


def poi_similarity(a: PoiSignature, b: PoiSignature, thre_dist: float = DEFAULT_THRE_DIST,
                   thre_harris: float = DEFAULT_THRE_HARRIS) -> float:
    """Fraction of ``a``'s points (the reference side) matched in ``b``."""
    if len(a) == 0:
        return 0.0
    return len(match_points(a, b, thre_dist, thre_harris)) / len(a)
