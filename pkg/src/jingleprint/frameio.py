"""Frame decoding: PPM/PGM image sequences and uncompressed Y4M files.

Every decoder yields :class:`GrayFrame` objects, an immutable 8-bit luma
raster.  Colour input is reduced with BT.601 weights and round-half-up.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

FORMATS = ("ppm-sequence", "pgm-sequence", "y4m")

# Y4M colour spaces we accept; only the luma plane is decoded.
_Y4M_CHROMA = {
    "420": "420",
    "420jpeg": "420",
    "420paldv": "420",
    "420mpeg2": "420",
    "mono": "mono",
}


class FrameFormatError(ValueError):
    """Malformed or unsupported frame data.

    ``offset`` is the byte position in the offending file, when known.
    """

    def __init__(self, message: str, path: str | os.PathLike | None = None,
                 offset: int | None = None):
        parts = [message]
        if path is not None:
            parts.append(f"in {path}")
        if offset is not None:
            parts.append(f"at byte {offset}")
        super().__init__(" ".join(parts))
        self.path = path
        self.offset = offset


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """A decoded luma raster.

    ``luma`` is a read-only ``(height, width)`` uint8 array.
    """

    luma: np.ndarray
    index: int = 0

    def __post_init__(self):
        luma = np.asarray(self.luma)
        if luma.ndim != 2 or luma.size == 0:
            raise ValueError(f"luma must be a non-empty 2-D array, got shape {luma.shape}")
        if luma.dtype != np.uint8:
            if luma.min() < 0 or luma.max() > 255:
                raise ValueError("luma values must lie in [0, 255]")
            luma = luma.astype(np.uint8)
        if luma.flags.writeable or luma.base is not None:
            luma = luma.copy()
        luma.flags.writeable = False
        object.__setattr__(self, "luma", luma)

    @property
    def width(self) -> int:
        return self.luma.shape[1]

    @property
    def height(self) -> int:
        return self.luma.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayFrame):
            return NotImplemented
        return self.index == other.index and np.array_equal(self.luma, other.luma)

    __hash__ = None


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma, ``round(0.299 R + 0.587 G + 0.114 B)`` with halves rounded up.

    Works in integer thousandths so the rounding is exact.
    """
    rgb = np.asarray(rgb, dtype=np.int32)
    acc = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
    return np.clip((acc + 500) // 1000, 0, 255).astype(np.uint8)


# -- PNM ----------------------------------------------------------------------

def _pnm_header(data: bytes, path) -> tuple[bytes, int, int, int]:
    """Return ``(magic, width, height, payload_offset)`` for a P5/P6 file."""
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise FrameFormatError(f"unsupported PNM magic {magic!r}", path, 0)
    pos = 2
    values = []
    n = len(data)
    while len(values) < 3:
        # whitespace and comments between header tokens
        while pos < n and (data[pos:pos + 1].isspace() or data[pos:pos + 1] == b"#"):
            if data[pos:pos + 1] == b"#":
                while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FrameFormatError("malformed PNM header", path, start)
        values.append(int(data[start:pos]))
    if pos >= n or not data[pos:pos + 1].isspace():
        raise FrameFormatError("missing whitespace after PNM header", path, pos)
    width, height, maxval = values
    if width <= 0 or height <= 0:
        raise FrameFormatError(f"bad PNM dimensions {width}x{height}", path, 2)
    if maxval != 255:
        raise FrameFormatError(f"unsupported PNM maxval {maxval} (need 255)", path, pos)
    return magic, width, height, pos + 1


def read_pnm(path: str | os.PathLike, index: int = 0) -> GrayFrame:
    """Decode one binary PGM (P5) or PPM (P6) file."""
    data = Path(path).read_bytes()
    magic, width, height, offset = _pnm_header(data, path)
    channels = 3 if magic == b"P6" else 1
    expected = width * height * channels
    available = len(data) - offset
    if available < expected:
        raise FrameFormatError(
            f"truncated frame payload: expected {expected} bytes, {available} available",
            path, offset)
    pixels = np.frombuffer(data, dtype=np.uint8, count=expected, offset=offset)
    if channels == 3:
        luma = rgb_to_luma(pixels.reshape(height, width, 3))
    else:
        luma = pixels.reshape(height, width)
    return GrayFrame(luma, index)


def write_pgm(path: str | os.PathLike, luma: np.ndarray) -> None:
    luma = np.asarray(luma, dtype=np.uint8)
    h, w = luma.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(luma).tobytes())


def write_ppm(path: str | os.PathLike, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(rgb).tobytes())


# -- Y4M ----------------------------------------------------------------------

def _parse_y4m_header(fh: BinaryIO, path) -> tuple[int, int, str, int]:
    line = fh.readline()
    if not line.startswith(b"YUV4MPEG2"):
        raise FrameFormatError("missing YUV4MPEG2 signature", path, 0)
    if not line.endswith(b"\n"):
        raise FrameFormatError("unterminated Y4M header", path, len(line))
    width = height = None
    chroma = "420jpeg"
    pos = len(b"YUV4MPEG2")
    for token in line[pos:].split():
        key, value = chr(token[0]), token[1:].decode("ascii", "replace")
        if key == "W":
            width = int(value)
        elif key == "H":
            height = int(value)
        elif key == "C":
            chroma = value
    if not width or not height or width <= 0 or height <= 0:
        raise FrameFormatError("Y4M header lacks positive W/H", path, 0)
    if chroma not in _Y4M_CHROMA:
        raise FrameFormatError(f"unsupported Y4M colour space C{chroma}", path, 0)
    return width, height, _Y4M_CHROMA[chroma], len(line)


def y4m_frame_bytes(width: int, height: int, chroma: str) -> int:
    if chroma == "mono":
        return width * height
    cw, ch = (width + 1) // 2, (height + 1) // 2
    return width * height + 2 * cw * ch


def write_y4m(path: str | os.PathLike, frames, fps: int = 25) -> None:
    """Write luma rasters as a ``Cmono`` Y4M stream."""
    frames = iter(frames)
    with open(path, "wb") as fh:
        header_written = False
        for luma in frames:
            luma = np.asarray(luma, dtype=np.uint8)
            if not header_written:
                h, w = luma.shape
                fh.write(b"YUV4MPEG2 W%d H%d F%d:1 Ip A1:1 Cmono\n" % (w, h, fps))
                header_written = True
            fh.write(b"FRAME\n")
            fh.write(np.ascontiguousarray(luma).tobytes())
        if not header_written:
            raise ValueError("cannot write an empty Y4M stream")


# -- sources ------------------------------------------------------------------

_SEQ_EXT = {"ppm-sequence": (".ppm",), "pgm-sequence": (".pgm",)}


def detect_format(path: str | os.PathLike) -> str:
    p = Path(path)
    if p.is_dir():
        names = [q.suffix.lower() for q in p.iterdir() if q.is_file()]
        if ".ppm" in names:
            return "ppm-sequence"
        if ".pgm" in names:
            return "pgm-sequence"
        raise FrameFormatError("no frames found", path)
    if p.suffix.lower() == ".y4m":
        return "y4m"
    if p.suffix.lower() in (".ppm", ".pgm"):
        return "ppm-sequence" if p.suffix.lower() == ".ppm" else "pgm-sequence"
    raise FrameFormatError(f"cannot infer frame format of {p.name}", path)


@dataclass
class FrameSource:
    """Sequential reader over a frame container.

    Single consumer.  ``frame_count`` is ``None`` when it cannot be known
    without decoding (Y4M).
    """

    path: Path
    format: str
    frame_count: int | None = None
    cursor: int = 0
    width: int | None = None
    height: int | None = None
    _files: list = field(default_factory=list, repr=False)
    _fh: BinaryIO | None = field(default=None, repr=False)
    _chroma: str = field(default="mono", repr=False)
    _data_start: int = field(default=0, repr=False)

    def next_frame(self) -> GrayFrame | None:
        """Decode the next frame, or return ``None`` at end of stream."""
        if self.format == "y4m":
            frame = self._next_y4m()
        else:
            if self.cursor >= len(self._files):
                return None
            frame = read_pnm(self._files[self.cursor], self.cursor)
        if frame is not None:
            self.cursor += 1
        return frame

    def _next_y4m(self) -> GrayFrame | None:
        fh = self._fh
        offset = fh.tell()
        line = fh.readline()
        if not line:
            return None
        if not line.startswith(b"FRAME") or not line.endswith(b"\n"):
            raise FrameFormatError("expected FRAME marker", self.path, offset)
        payload = y4m_frame_bytes(self.width, self.height, self._chroma)
        start = fh.tell()
        data = fh.read(payload)
        if len(data) < payload:
            raise FrameFormatError(
                f"truncated frame payload: expected {payload} bytes, {len(data)} available",
                self.path, start)
        luma = np.frombuffer(data, dtype=np.uint8, count=self.width * self.height)
        return GrayFrame(luma.reshape(self.height, self.width), self.cursor)

    def rewind(self) -> None:
        self.cursor = 0
        if self._fh is not None:
            self._fh.seek(self._data_start)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __iter__(self) -> Iterator[GrayFrame]:
        while True:
            frame = self.next_frame()
            if frame is None:
                return
            yield frame

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_frame_source(path: str | os.PathLike, format: str | None = None) -> FrameSource:
    """Open ``path`` positioned at frame 0.

    ``format`` is one of :data:`FORMATS`; ``None`` infers it from the path.
    A single ``.ppm``/``.pgm`` file is treated as a one-frame sequence.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"frame source not found: {p}")
    if format is None:
        format = detect_format(p)
    if format not in FORMATS:
        raise FrameFormatError(f"unsupported format {format!r}", p)

    if format == "y4m":
        fh = open(p, "rb")
        try:
            width, height, chroma, start = _parse_y4m_header(fh, p)
        except Exception:
            fh.close()
            raise
        return FrameSource(p, format, None, 0, width, height,
                           _fh=fh, _chroma=chroma, _data_start=start)

    exts = _SEQ_EXT[format]
    if p.is_dir():
        files = sorted(q for q in p.iterdir() if q.is_file() and q.suffix.lower() in exts)
    else:
        files = [p] if p.suffix.lower() in exts else []
    if not files:
        raise FrameFormatError("no frames found", p)
    first = read_pnm(files[0])
    return FrameSource(p, format, len(files), 0, first.width, first.height, _files=files)
