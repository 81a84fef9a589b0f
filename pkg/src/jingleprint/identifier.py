"""Sliding-window identification of catalogued jingles in a frame stream.

For a candidate start offset ``j`` and a catalogue entry with
``n_frame`` samples spaced ``t_step`` apart, stream frame
``j + i * t_step`` is compared with the entry's ``i``-th frame signature.
The entry is identified at ``j`` only when every sampled frame clears
the fused threshold.
"""

from __future__ import annotations

import csv
import logging
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .catalogue import Catalogue, CatalogueEntry
from .ccv import ccv_similarity
from .frameio import FrameSource, GrayFrame
from .poi import DEFAULT_THRE_DIST, DEFAULT_THRE_HARRIS, poi_similarity
from .signature import DescriptorParams, FrameSignature, frame_signature

log = logging.getLogger(__name__)

REPORT_HEADER = ("stream_offset", "program_id", "score")


class ParameterMismatch(ValueError):
    """Catalogue entries and scanner settings disagree."""


@dataclass(frozen=True)
class Detection:
    stream_offset: int
    program_id: str
    score: float


@dataclass
class ScanConfig:
    stride: int = 1
    jobs: int = 1
    cache: bool = True
    params: DescriptorParams | None = None   # scanner-side descriptor settings to enforce
    n_frame: int | None = None
    t_step: int | None = None
    thre_dist: float = DEFAULT_THRE_DIST
    thre_harris: float = DEFAULT_THRE_HARRIS
    emit_undefined: bool = False
    trace: bool = False
    batch: int = 64
    report_path: str | os.PathLike | None = None

    def __post_init__(self):
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")


@dataclass
class ScanResult:
    detections: list[Detection]
    frames_read: int
    # program_id -> [(offset, fused similarity of the first sample)], when tracing
    trace: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    undefined: list[int] = field(default_factory=list)


def fused_similarity(sim_ccv: float, sim_poi: float, w_ccv: float, w_poi: float) -> float:
    total = w_ccv + w_poi
    if not total > 0:
        raise ValueError("descriptor weights must have a positive sum")
    if w_poi == 0:
        return float(sim_ccv)
    if w_ccv == 0:
        return float(sim_poi)
    return (w_ccv * sim_ccv + w_poi * sim_poi) / total


def signature_threshold(th_ccv: float, th_poi: float, w_ccv: float, w_poi: float) -> float:
    return fused_similarity(th_ccv, th_poi, w_ccv, w_poi)


def frame_decision(fused: float, th_ccv: float, th_poi: float,
                   w_ccv: float, w_poi: float) -> int:
    """1 when the fused similarity strictly exceeds the weighted threshold."""
    return int(fused > signature_threshold(th_ccv, th_poi, w_ccv, w_poi))


def compare_frames(entry: CatalogueEntry, sample: int, observed: FrameSignature,
                   thre_dist: float = DEFAULT_THRE_DIST,
                   thre_harris: float = DEFAULT_THRE_HARRIS,
                   exact: bool = False) -> tuple[int, float | None]:
    """Decision and fused similarity of one stream frame against one entry sample.

    Unless ``exact`` is set, the POI comparison is skipped when even a
    perfect POI score could not lift the fused value over threshold; the
    fused value is then reported as ``None``.
    """
    ref = entry.vsig.frames[sample]
    w_ccv, w_poi = entry.w_ccv, entry.w_poi
    sim_ccv = ccv_similarity(ref.ccv, observed.ccv) if w_ccv > 0 else 0.0
    if not exact and w_poi > 0:
        best = fused_similarity(sim_ccv, 1.0, w_ccv, w_poi)
        if not best > signature_threshold(entry.th_ccv, entry.th_poi, w_ccv, w_poi):
            return 0, None
    sim_poi = poi_similarity(ref.poi, observed.poi, thre_dist, thre_harris) if w_poi > 0 else 0.0
    fused = fused_similarity(sim_ccv, sim_poi, w_ccv, w_poi)
    return frame_decision(fused, entry.th_ccv, entry.th_poi, w_ccv, w_poi), fused


DecisionHook = Callable[[CatalogueEntry, int, int, int], int]


def window_match(entry: CatalogueEntry, observed: Callable[[int], FrameSignature],
                 offset: int, thre_dist: float = DEFAULT_THRE_DIST,
                 thre_harris: float = DEFAULT_THRE_HARRIS,
                 hook: DecisionHook | None = None,
                 memo: dict | None = None) -> Detection | None:
    """Test ``entry`` against the window starting at ``offset``.

    ``observed(k)`` returns the signature of stream frame ``k``.  ``hook``
    may rewrite each per-frame decision as ``hook(entry, sample, k, decision)``.
    ``memo`` caches ``(k, program_id, sample) -> (decision, fused)``.
    """
    fused_values = []
    for i in range(entry.vsig.n_frame):
        k = offset + i * entry.vsig.t_step
        key = (k, entry.program_id, i)
        hit = memo.get(key) if memo is not None else None
        if hit is None:
            hit = compare_frames(entry, i, observed(k), thre_dist, thre_harris)
            if memo is not None:
                memo[key] = hit
        decision, fused = hit
        if hook is not None:
            decision = hook(entry, i, k, decision)
        if not decision:
            return None
        if fused is None:
            # decision forced on by the hook after the POI shortcut
            fused = compare_frames(entry, i, observed(k), thre_dist, thre_harris, exact=True)[1]
        fused_values.append(fused)
    return Detection(offset, entry.program_id, sum(fused_values) / len(fused_values))


def merge_detections(raw: Iterable[Detection], t_step_of: dict[str, int]) -> list[Detection]:
    """Collapse runs of one program's detections spaced at most ``t_step`` apart.

    The best-scoring detection of each run survives (earliest on ties).
    """
    by_program: dict[str, list[Detection]] = {}
    for d in raw:
        by_program.setdefault(d.program_id, []).append(d)
    merged = []
    for pid, dets in by_program.items():
        dets.sort(key=lambda d: d.stream_offset)
        gap = t_step_of[pid]
        best = last = dets[0]
        for d in dets[1:]:
            if d.stream_offset - last.stream_offset <= gap:
                if d.score > best.score:
                    best = d
            else:
                merged.append(best)
                best = d
            last = d
        merged.append(best)
    merged.sort(key=lambda d: (d.stream_offset, d.program_id))
    return merged


def check_compatible(catalogue: Catalogue, cfg: ScanConfig) -> DescriptorParams:
    """Common descriptor params of all entries; raise on any disagreement."""
    if len(catalogue) == 0:
        raise ParameterMismatch("catalogue is empty")
    params = None
    for e in catalogue:
        if params is None:
            params = e.vsig.params
        elif e.vsig.params != params:
            raise ParameterMismatch(
                f"entry {e.program_id} was signed with {e.vsig.params.as_dict()}, "
                f"others with {params.as_dict()}")
        if cfg.n_frame is not None and cfg.n_frame != e.vsig.n_frame:
            raise ParameterMismatch(
                f"entry {e.program_id} has n_frame={e.vsig.n_frame}, scanner wants {cfg.n_frame}")
        if cfg.t_step is not None and cfg.t_step != e.vsig.t_step:
            raise ParameterMismatch(
                f"entry {e.program_id} has t_step={e.vsig.t_step}, scanner wants {cfg.t_step}")
    if cfg.params is not None:
        wanted = cfg.params if cfg.params.tau is not None else \
            DescriptorParams(**{**cfg.params.as_dict(), "tau": params.tau})
        if wanted != params:
            raise ParameterMismatch(
                f"catalogue params {params.as_dict()} differ from scanner params {wanted.as_dict()}")
    return params


def _sign_batch(args):
    frames, params = args
    return [frame_signature(f, params) for f in frames]


def _signed_frames(src: FrameSource, params: DescriptorParams, jobs: int,
                   batch: int) -> Iterator[tuple[GrayFrame, FrameSignature]]:
    if jobs == 1:
        for frame in src:
            yield frame, frame_signature(frame, params)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        pending: deque = deque()
        exhausted = False
        frames_iter = iter(src)
        while True:
            while not exhausted and len(pending) < 2 * jobs:
                chunk = []
                for frame in frames_iter:
                    chunk.append(frame)
                    if len(chunk) == batch:
                        break
                if not chunk:
                    exhausted = True
                    break
                pending.append((chunk, pool.submit(_sign_batch, (chunk, params))))
                if len(chunk) < batch:
                    exhausted = True
            if not pending:
                return
            chunk, fut = pending.popleft()
            yield from zip(chunk, fut.result())


def scan_stream(src: FrameSource, catalogue: Catalogue, cfg: ScanConfig = ScanConfig(),
                hook: DecisionHook | None = None) -> ScanResult:
    """Locate every catalogued jingle in ``src``.

    Frames are decoded once, in order; signatures live in a sliding buffer
    just long enough for the widest catalogue window.  With
    ``cfg.cache=False`` signatures are recomputed on every use instead.
    """
    params = check_compatible(catalogue, cfg)
    entries = list(catalogue)
    span = max(e.vsig.span for e in entries)
    pixel_total = entries[0].vsig.frames[0].ccv.pixel_total

    frames: dict[int, GrayFrame] = {}
    sigs: dict[int, FrameSignature] = {}
    memo: dict | None = {} if cfg.cache else None

    def observed(k: int) -> FrameSignature:
        if cfg.cache:
            return sigs[k]
        return frame_signature(frames[k], params)

    raw: list[Detection] = []
    result = ScanResult([], 0)
    next_offset = 0

    def evaluate(offset: int, available: int) -> None:
        hit_any = False
        for e in entries:
            if offset + e.vsig.span > available:
                continue
            if cfg.trace:
                ref_fused = compare_frames(e, 0, observed(offset), cfg.thre_dist,
                                           cfg.thre_harris, exact=True)[1]
                result.trace.setdefault(e.program_id, []).append((offset, ref_fused))
            det = window_match(e, observed, offset, cfg.thre_dist, cfg.thre_harris, hook, memo)
            if det is not None:
                raw.append(det)
                hit_any = True
        if cfg.emit_undefined and not hit_any:
            result.undefined.append(offset)

    source = (_signed_frames(src, params, cfg.jobs, cfg.batch) if cfg.cache
              else ((f, None) for f in src))
    count = 0
    for frame, sig in source:
        if frame.width * frame.height != pixel_total:
            raise ParameterMismatch(
                f"stream frames are {frame.width}x{frame.height}; catalogue signatures "
                f"cover {pixel_total} pixels")
        if cfg.cache:
            sigs[frame.index] = sig
        else:
            frames[frame.index] = frame
        count = frame.index + 1
        # every window starting at next_offset is now fully decoded
        while next_offset + span <= count:
            evaluate(next_offset, count)
            next_offset += cfg.stride
            # drop frames no later window can reach
            for k in [k for k in (sigs if cfg.cache else frames) if k < next_offset]:
                (sigs if cfg.cache else frames).pop(k)
            if memo is not None and len(memo) > 4 * span * len(entries):
                for key in [key for key in memo if key[0] < next_offset]:
                    del memo[key]
    # shorter windows may still fit in the tail
    while next_offset < count:
        evaluate(next_offset, count)
        next_offset += cfg.stride

    result.frames_read = count
    result.detections = merge_detections(raw, {e.program_id: e.vsig.t_step for e in entries})
    log.info("scanned %d frames against %d entries: %d detections",
             count, len(entries), len(result.detections))
    return result


def write_report(detections: list[Detection], path: str | os.PathLike) -> None:
    """Detection CSV: ``stream_offset,program_id,score`` with 4-decimal scores."""
    offsets = [d.stream_offset for d in detections]
    if offsets != sorted(offsets):
        raise ValueError("detections must be sorted by stream_offset")
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for d in detections:
            writer.writerow((d.stream_offset, d.program_id, f"{d.score:.4f}"))


def read_report(path: str | os.PathLike) -> list[Detection]:
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != REPORT_HEADER:
            raise ValueError(f"{path}: not a detection report")
        return [Detection(int(o), pid, float(s)) for o, pid, s in reader]
