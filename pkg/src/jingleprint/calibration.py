"""Scoring detections against ground truth and deriving descriptor weights."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .catalogue import Catalogue, CatalogueEntry, InsufficientEvidence, calibrate_weight
from .frameio import open_frame_source
from .identifier import Detection, ScanConfig, scan_stream

DESCRIPTORS = ("ccv", "poi")


@dataclass(frozen=True)
class MatchCounts:
    ci: int
    mi: int
    fi: int

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.ci + other.ci, self.mi + other.mi, self.fi + other.fi)

    @property
    def recall(self) -> float | None:
        return self.ci / (self.ci + self.mi) if self.ci + self.mi else None

    @property
    def precision(self) -> float | None:
        return self.ci / (self.ci + self.fi) if self.ci + self.fi else None


@dataclass(frozen=True)
class CalibrationReport:
    descriptor: str
    ci: int
    mi: int
    fi: int
    recall: float
    precision: float
    weight: float


def match_detections(detections: Iterable[Detection], truth: Iterable[tuple[int, str]],
                     tolerance: dict[str, int] | int) -> MatchCounts:
    """Pair detections with truth ``(offset, program_id)`` rows of one stream.

    A detection is correct when it names the right program within
    ``tolerance`` frames of an unclaimed truth offset; closest pairs are
    claimed first.
    """
    detections = list(detections)
    truth = list(truth)
    candidates = []
    for ti, (t_off, t_pid) in enumerate(truth):
        tol = tolerance if isinstance(tolerance, int) else tolerance.get(t_pid, 0)
        for di, d in enumerate(detections):
            if d.program_id == t_pid and abs(d.stream_offset - t_off) <= tol:
                candidates.append((abs(d.stream_offset - t_off), ti, di))
    candidates.sort()
    used_t, used_d = set(), set()
    for _, ti, di in candidates:
        if ti in used_t or di in used_d:
            continue
        used_t.add(ti)
        used_d.add(di)
    ci = len(used_t)
    return MatchCounts(ci, len(truth) - ci, len(detections) - len(used_d))


def single_descriptor(entry: CatalogueEntry, descriptor: str) -> CatalogueEntry:
    """The entry with the other descriptor's weight forced to zero."""
    if descriptor == "ccv":
        return replace(entry, w_ccv=1.0, w_poi=0.0)
    if descriptor == "poi":
        return replace(entry, w_ccv=0.0, w_poi=1.0)
    raise ValueError(f"unknown descriptor {descriptor!r}")


def resolve_stream(stream_path: str, base: Path | None) -> Path:
    p = Path(stream_path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


def evaluate(catalogue: Catalogue, truth: list[tuple[str, int, str]],
             cfg: ScanConfig = ScanConfig(), base: Path | None = None,
             streams: Iterable[str] | None = None) -> tuple[MatchCounts, dict[str, list[Detection]]]:
    """Scan every stream named in ``truth`` (plus ``streams``) and count CI/MI/FI.

    Truth rows for programs absent from the catalogue are ignored.
    """
    tolerance = {e.program_id: e.vsig.t_step for e in catalogue}
    names = sorted(set(r[0] for r in truth) | set(streams or ()))
    totals = MatchCounts(0, 0, 0)
    found = {}
    for name in names:
        with open_frame_source(resolve_stream(name, base)) as src:
            dets = scan_stream(src, catalogue, cfg).detections
        found[name] = dets
        rows = [(off, pid) for s, off, pid in truth if s == name and pid in catalogue]
        totals = totals + match_detections(dets, rows, tolerance)
    return totals, found


def run_calibration(catalogue: Catalogue, truth: list[tuple[str, int, str]], descriptor: str,
                    cfg: ScanConfig = ScanConfig(), base: Path | None = None,
                    streams: Iterable[str] | None = None) -> CalibrationReport:
    """Identify with one descriptor alone and turn its counts into a weight."""
    if not truth:
        raise InsufficientEvidence("empty truth set")
    single = Catalogue({pid: single_descriptor(e, descriptor) for pid, e in catalogue.entries.items()})
    counts, _ = evaluate(single, truth, cfg, base, streams)
    recall, precision, weight = calibrate_weight(counts.ci, counts.mi, counts.fi)
    return CalibrationReport(descriptor, counts.ci, counts.mi, counts.fi, recall, precision, weight)


def calibrate_catalogue(catalogue: Catalogue, truth: list[tuple[str, int, str]],
                        cfg: ScanConfig = ScanConfig(), base: Path | None = None
                        ) -> tuple[Catalogue, dict[str, dict[str, CalibrationReport]]]:
    """Per channel, derive both descriptor weights and write them into the entries.

    All of a channel's streams are scanned for each descriptor so that
    detections in streams without that channel's truth count as false.
    """
    channels = sorted({e.channel for e in catalogue})
    all_streams = sorted({r[0] for r in truth})
    reports: dict[str, dict[str, CalibrationReport]] = {}
    updated = Catalogue(dict(catalogue.entries))
    for channel in channels:
        members = Catalogue({pid: e for pid, e in catalogue.entries.items() if e.channel == channel})
        rows = [r for r in truth if r[2] in members]
        if not rows:
            raise InsufficientEvidence(f"insufficient training evidence: no truth for channel {channel}")
        reports[channel] = {d: run_calibration(members, rows, d, cfg, base, all_streams)
                            for d in DESCRIPTORS}
        w_ccv, w_poi = reports[channel]["ccv"].weight, reports[channel]["poi"].weight
        if w_ccv + w_poi <= 0:
            raise InsufficientEvidence(
                f"insufficient training evidence: both descriptor weights are zero for {channel}")
        for pid, e in members.entries.items():
            updated.entries[pid] = replace(e, w_ccv=w_ccv, w_poi=w_poi)
    return updated, reports
