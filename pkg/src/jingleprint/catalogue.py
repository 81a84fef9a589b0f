"""Reference catalogue of signed jingles and its text file format.

File layout (UTF-8, one record per line)::

    JINGLEPRINT-CATALOGUE v1
    ENTRY <program_id> <channel>
    PARAMS n_frame=5 t_step=12 n_color=64 tau=30 q=32.000000 ...
    WEIGHTS ccv=1.000000 poi=1.000000
    THRESHOLDS ccv=0.850000 poi=0.700000
    FRAME <source_index>
    CCV <a0> <b0> <a1> <b1> ...
    POI <count>
    <x> <y> <response>
    ...
    END
    CHECKSUM <crc32 hex of every preceding byte>

Reals carry six decimals; values are rounded to that precision when an
entry is built so that a save/load cycle is exact.
"""

from __future__ import annotations

import os
import re
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ccv import CcvSignature
from .poi import PoiSignature
from .signature import DescriptorParams, FrameSignature, VideoSignature

MAGIC = "JINGLEPRINT-CATALOGUE v1"
DEFAULT_TH_CCV = 0.85
DEFAULT_TH_POI = 0.70


class CatalogueError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class VersionMismatch(CatalogueError):
    pass


class ChecksumError(CatalogueError):
    pass


class DuplicateEntry(CatalogueError):
    pass


def _r6(x: float) -> float:
    return float(f"{float(x):.6f}")


def _check_token(name: str, value: str) -> None:
    if not value or any(c.isspace() for c in value):
        raise ValueError(f"{name} must be a non-empty token without whitespace: {value!r}")


@dataclass(frozen=True)
class CatalogueEntry:
    program_id: str
    channel: str
    vsig: VideoSignature
    w_ccv: float = 1.0
    w_poi: float = 1.0
    th_ccv: float = DEFAULT_TH_CCV
    th_poi: float = DEFAULT_TH_POI

    def __post_init__(self):
        _check_token("program_id", self.program_id)
        _check_token("channel", self.channel)
        for name in ("w_ccv", "w_poi", "th_ccv", "th_poi"):
            object.__setattr__(self, name, _r6(getattr(self, name)))
        if self.w_ccv < 0 or self.w_poi < 0 or self.w_ccv + self.w_poi <= 0:
            raise ValueError(f"weights must be non-negative with a positive sum, "
                             f"got ({self.w_ccv}, {self.w_poi})")
        for th in (self.th_ccv, self.th_poi):
            if not 0.0 <= th <= 1.0:
                raise ValueError(f"thresholds must lie in [0, 1], got {th}")
        p = self.vsig.params
        rounded = replace(p, q=_r6(p.q), k=_r6(p.k), sigma=_r6(p.sigma))
        if rounded != p:
            object.__setattr__(self, "vsig", replace(self.vsig, params=rounded))

    @property
    def th_sig(self) -> float:
        return (self.w_ccv * self.th_ccv + self.w_poi * self.th_poi) / (self.w_ccv + self.w_poi)


@dataclass
class Catalogue:
    entries: dict[str, CatalogueEntry] = field(default_factory=dict)

    def add(self, entry: CatalogueEntry, replace: bool = False) -> None:
        if entry.program_id in self.entries and not replace:
            raise DuplicateEntry(f"program id {entry.program_id!r} already catalogued")
        self.entries[entry.program_id] = entry

    def remove(self, program_id: str) -> CatalogueEntry:
        try:
            return self.entries.pop(program_id)
        except KeyError:
            raise KeyError(f"no catalogue entry {program_id!r}") from None

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, program_id: str) -> CatalogueEntry:
        return self.entries[program_id]

    def __contains__(self, program_id) -> bool:
        return program_id in self.entries


# -- serialisation --------------------------------------------------------------

def _entry_lines(e: CatalogueEntry) -> list[str]:
    v, p = e.vsig, e.vsig.params
    lines = [
        f"ENTRY {e.program_id} {e.channel}",
        f"PARAMS n_frame={v.n_frame} t_step={v.t_step} n_color={p.n_color} tau={p.tau} "
        f"q={p.q:.6f} k={p.k:.6f} sigma={p.sigma:.6f} n_poi={p.n_poi} nms={p.nms}",
        f"WEIGHTS ccv={e.w_ccv:.6f} poi={e.w_poi:.6f}",
        f"THRESHOLDS ccv={e.th_ccv:.6f} poi={e.th_poi:.6f}",
    ]
    for fs in v.frames:
        lines.append(f"FRAME {fs.source_index}")
        lines.append("CCV " + " ".join(str(int(c)) for c in fs.ccv.pairs.ravel()))
        lines.append(f"POI {len(fs.poi)}")
        lines.extend(f"{pt.x} {pt.y} {pt.response:.6f}" for pt in fs.poi)
    lines.append("END")
    return lines


def dumps(catalogue: Catalogue) -> str:
    body = MAGIC + "\n" + "".join(line + "\n" for e in catalogue for line in _entry_lines(e))
    crc = zlib.crc32(body.encode("utf-8"))
    return body + f"CHECKSUM {crc:08x}\n"


def save_catalogue(catalogue: Catalogue, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(catalogue).encode("utf-8"))
    os.replace(tmp, path)


class _Lines:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self, what: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.lines):
            raise CatalogueError(f"unexpected end of file, expected {what}", self.pos + 2)
        self.pos += 1
        # file line numbers count the magic line
        return self.pos + 1, self.lines[self.pos - 1].split(" ")

    def expect(self, keyword: str) -> tuple[int, list[str]]:
        lineno, tokens = self.next(keyword)
        if tokens[0] != keyword:
            raise CatalogueError(f"expected {keyword}, found {tokens[0]!r}", lineno)
        return lineno, tokens[1:]


def _kv(tokens: list[str], keys: tuple[str, ...], lineno: int) -> dict[str, str]:
    pairs = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise CatalogueError(f"malformed field {tok!r}", lineno)
        pairs[key] = value
    if tuple(pairs) != keys:
        raise CatalogueError(f"expected fields {' '.join(keys)}", lineno)
    return pairs


def _uint(text: str, lineno: int) -> int:
    if not text.isdigit():
        raise CatalogueError(f"expected unsigned integer, found {text!r}", lineno)
    return int(text)


def _real(text: str, lineno: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise CatalogueError(f"expected real number, found {text!r}", lineno) from None


def _parse_entry(src: _Lines, lineno: int, head: list[str]) -> CatalogueEntry:
    if len(head) != 2:
        raise CatalogueError("ENTRY needs <program_id> <channel>", lineno)
    program_id, channel = head
    ln, toks = src.expect("PARAMS")
    kv = _kv(toks, ("n_frame", "t_step", "n_color", "tau", "q", "k", "sigma", "n_poi", "nms"), ln)
    n_frame, t_step = _uint(kv["n_frame"], ln), _uint(kv["t_step"], ln)
    try:
        params = DescriptorParams(
            n_color=_uint(kv["n_color"], ln), tau=_uint(kv["tau"], ln), q=_real(kv["q"], ln),
            k=_real(kv["k"], ln), sigma=_real(kv["sigma"], ln),
            n_poi=_uint(kv["n_poi"], ln), nms=_uint(kv["nms"], ln))
    except ValueError as exc:
        if isinstance(exc, CatalogueError):
            raise
        raise CatalogueError(str(exc), ln) from None
    ln, toks = src.expect("WEIGHTS")
    w = _kv(toks, ("ccv", "poi"), ln)
    w_ccv, w_poi = _real(w["ccv"], ln), _real(w["poi"], ln)
    ln, toks = src.expect("THRESHOLDS")
    th = _kv(toks, ("ccv", "poi"), ln)
    th_ccv, th_poi = _real(th["ccv"], ln), _real(th["poi"], ln)

    frames = []
    for _ in range(n_frame):
        ln, toks = src.expect("FRAME")
        if len(toks) != 1:
            raise CatalogueError("FRAME needs one index", ln)
        index = _uint(toks[0], ln)
        ln, toks = src.expect("CCV")
        if len(toks) != 2 * params.n_color:
            raise CatalogueError(f"CCV needs {2 * params.n_color} counts, found {len(toks)}", ln)
        ccv = CcvSignature(np.array([_uint(t, ln) for t in toks], dtype=np.int64).reshape(-1, 2))
        ln, toks = src.expect("POI")
        if len(toks) != 1:
            raise CatalogueError("POI needs one count", ln)
        xs, ys, rs = [], [], []
        for _ in range(_uint(toks[0], ln)):
            ln, toks = src.next("POI point")
            if len(toks) != 3:
                raise CatalogueError("POI point needs <x> <y> <response>", ln)
            xs.append(_uint(toks[0], ln))
            ys.append(_uint(toks[1], ln))
            rs.append(_real(toks[2], ln))
        try:
            poi = PoiSignature(xs, ys, rs)
        except ValueError as exc:
            raise CatalogueError(str(exc), ln) from None
        frames.append(FrameSignature(ccv, poi, index))
    ln, toks = src.expect("END")
    if toks:
        raise CatalogueError("trailing tokens after END", ln)
    try:
        vsig = VideoSignature(tuple(frames), n_frame, t_step, params)
        return CatalogueEntry(program_id, channel, vsig, w_ccv, w_poi, th_ccv, th_poi)
    except ValueError as exc:
        raise CatalogueError(str(exc), lineno) from None


def loads(data: bytes | str) -> Catalogue:
    if isinstance(data, str):
        data = data.encode("utf-8")
    first = data.split(b"\n", 1)[0]
    if first != MAGIC.encode():
        raise VersionMismatch(f"not a {MAGIC} file (found {first[:40]!r})", 1)
    if not data.endswith(b"\n"):
        raise CatalogueError("file does not end with a newline")
    body, _, last = data[:-1].rpartition(b"\n")
    body += b"\n"
    n_lines = body.count(b"\n") + 1
    if not last.startswith(b"CHECKSUM "):
        raise ChecksumError("missing CHECKSUM line", n_lines)
    digits = last[len(b"CHECKSUM "):]
    if not re.fullmatch(rb"[0-9a-f]{8}", digits):
        raise ChecksumError("malformed CHECKSUM line", n_lines)
    expected = int(digits, 16)
    actual = zlib.crc32(body)
    if actual != expected:
        raise ChecksumError(f"checksum mismatch: file says {expected:08x}, "
                            f"content hashes to {actual:08x}", n_lines)
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CatalogueError(f"invalid UTF-8: {exc}") from None

    src = _Lines(text.split("\n")[1:-1])
    catalogue = Catalogue()
    while src.pos < len(src.lines):
        lineno, tokens = src.expect("ENTRY")
        entry = _parse_entry(src, lineno, tokens)
        if entry.program_id in catalogue:
            raise DuplicateEntry(f"duplicate program id {entry.program_id!r}", lineno)
        catalogue.add(entry)
    return catalogue


def load_catalogue(path: str | os.PathLike) -> Catalogue:
    return loads(Path(path).read_bytes())


# -- descriptor weights ------------------------------------------------------------

class InsufficientEvidence(ValueError):
    pass


def calibrate_weight(ci: int, mi: int, fi: int) -> tuple[float, float, float]:
    """Recall, precision and their harmonic mean (the descriptor weight)."""
    if min(ci, mi, fi) < 0:
        raise ValueError("counts must be non-negative")
    if ci + mi == 0 or ci + fi == 0:
        raise InsufficientEvidence(
            f"insufficient training evidence (CI={ci}, MI={mi}, FI={fi})")
    recall = ci / (ci + mi)
    precision = ci / (ci + fi)
    return recall, precision, f1_weight(recall, precision)


def f1_weight(recall: float, precision: float) -> float:
    if recall + precision == 0:
        return 0.0
    return 2.0 * recall * precision / (recall + precision)
