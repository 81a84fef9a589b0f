"""Per-frame composite signatures and sampled video signatures."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .ccv import CcvSignature, compute_ccv, default_tau
from .frameio import FrameSource, GrayFrame
from .poi import (DEFAULT_N_POI, DEFAULT_NMS_RADIUS, HARRIS_K, HARRIS_SIGMA,
                  PoiSignature, detect_pois)
from .preprocess import DEFAULT_N_COLORS, median_filter_3x3, quantize
from .srm import SrmParams, segment

DEFAULT_N_FRAME = 5
DEFAULT_T_STEP = 12


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class DescriptorParams:
    """Everything that shapes a frame signature.

    ``tau=None`` means 1% of the frame's pixels; :meth:`resolve` pins it.
    """

    n_color: int = DEFAULT_N_COLORS
    tau: int | None = None
    q: float = 32.0
    k: float = HARRIS_K
    sigma: float = HARRIS_SIGMA
    n_poi: int = DEFAULT_N_POI
    nms: int = DEFAULT_NMS_RADIUS

    def __post_init__(self):
        if not 1 <= self.n_color <= 256:
            raise ValueError(f"n_color must be in [1, 256], got {self.n_color}")
        if self.tau is not None and self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.n_poi < 1:
            raise ValueError(f"n_poi must be >= 1, got {self.n_poi}")
        if self.nms < 0:
            raise ValueError(f"nms must be >= 0, got {self.nms}")

    def resolve(self, n_pixels: int) -> "DescriptorParams":
        if self.tau is not None:
            return self
        return replace(self, tau=default_tau(n_pixels))

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class FrameSignature:
    ccv: CcvSignature
    poi: PoiSignature
    source_index: int


@dataclass(frozen=True)
class VideoSignature:
    frames: tuple[FrameSignature, ...]
    n_frame: int
    t_step: int
    params: DescriptorParams

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.n_frame < 1 or self.t_step < 1:
            raise ValueError("n_frame and t_step must be >= 1")
        if len(self.frames) != self.n_frame:
            raise ValueError(f"expected {self.n_frame} frame signatures, got {len(self.frames)}")
        start = self.frames[0].source_index
        for i, fs in enumerate(self.frames):
            if fs.source_index != start + i * self.t_step:
                raise ValueError(f"frame {i} has source index {fs.source_index}, "
                                 f"expected {start + i * self.t_step}")
        if self.params.tau is None:
            raise ValueError("video signature params must have a resolved tau")

    @property
    def start(self) -> int:
        return self.frames[0].source_index

    @property
    def span(self) -> int:
        """Frames covered from first to last sample, inclusive."""
        return (self.n_frame - 1) * self.t_step + 1


def frame_signature(frame: GrayFrame, params: DescriptorParams = DescriptorParams()) -> FrameSignature:
    """Median-filter once, then CCV over SRM regions and Harris points on the result."""
    params = params.resolve(frame.width * frame.height)
    smooth = median_filter_3x3(frame)
    qf = quantize(smooth, params.n_color)
    regions = segment(qf, SrmParams(q=params.q))
    ccv = compute_ccv(qf, regions, params.tau)
    poi = detect_pois(smooth, params.n_poi, params.nms, params.k, params.sigma)
    return FrameSignature(ccv, poi, frame.index)


def sign_segment(src: FrameSource, start: int = 0, n_frame: int = DEFAULT_N_FRAME,
                 t_step: int = DEFAULT_T_STEP,
                 params: DescriptorParams = DescriptorParams()) -> VideoSignature:
    """Sign frames ``start, start + t_step, ...`` read sequentially from ``src``."""
    if start < 0 or n_frame < 1 or t_step < 1:
        raise ValueError("need start >= 0, n_frame >= 1, t_step >= 1")
    wanted = [start + i * t_step for i in range(n_frame)]
    if src.frame_count is not None and wanted[-1] >= src.frame_count:
        raise SignatureError(f"frame {wanted[-1]} missing: source has {src.frame_count} frames")
    if src.cursor > start:
        src.rewind()
    sigs = []
    resolved = None
    for target in wanted:
        frame = src.next_frame()
        while frame is not None and frame.index < target:
            frame = src.next_frame()
        if frame is None:
            raise SignatureError(f"frame {target} missing: stream ended at {src.cursor}")
        if resolved is None:
            resolved = params.resolve(frame.width * frame.height)
        sigs.append(frame_signature(frame, resolved))
    return VideoSignature(tuple(sigs), n_frame, t_step, resolved)
