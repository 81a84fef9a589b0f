"""Seeded synthetic broadcast corpus: jingles planted in noise streams.

Layout written under the output directory::

    jingles/<program_id>/frame_000000.pgm ...   clean jingle frames
    jingles.csv                                 program_id,channel,path
    streams/stream_00.y4m ...                   filler + planted jingles
    truth.csv                                   stream_path,offset,program_id
    confusers.csv                               stream_path,offset,like (near-duplicates, not truth)
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frameio import write_pgm, write_y4m

TRUTH_HEADER = ("stream_path", "offset", "program_id")

# grey levels sit mid-bucket for 64-bucket quantisation
PALETTE = np.array([4 * m + 2 for m in range(2, 63, 5)])


@dataclass
class Shape:
    kind: str            # "rect" or "tri"
    x: float
    y: float
    w: int
    h: int
    vx: float
    vy: float
    gray: int


@dataclass
class Jingle:
    program_id: str
    channel: str
    background: int
    shapes: list[Shape]
    length: int
    width: int
    height: int
    patch: tuple[int, int, int] | None = None   # (x, y, gray) marker of a near-duplicate

    def render(self, t: int) -> np.ndarray:
        img = np.full((self.height, self.width), self.background, dtype=np.uint8)
        yy, xx = np.mgrid[0:self.height, 0:self.width]
        for s in self.shapes:
            x0 = int(np.floor(s.x + s.vx * t))
            y0 = int(np.floor(s.y + s.vy * t))
            if s.kind == "rect":
                img[max(0, y0):max(0, y0 + s.h), max(0, x0):max(0, x0 + s.w)] = s.gray
            else:
                # right triangle with the hypotenuse falling left to right
                inside = ((xx >= x0) & (yy >= y0) & (yy < y0 + s.h)
                          & ((xx - x0) * s.h <= (yy - y0 + 1) * s.w))
                img[inside] = s.gray
        if self.patch is not None:
            px, py, g = self.patch
            img[py:py + 6, px:px + 6] = g
        return img

    def frames(self) -> list[np.ndarray]:
        return [self.render(t) for t in range(self.length)]


def make_jingle(rng: np.random.Generator, program_id: str, channel: str,
                width: int, height: int, length: int) -> Jingle:
    """A flat background carrying 3-4 slowly drifting rectangles/triangles."""
    grays = rng.choice(PALETTE, size=5, replace=False)
    shapes = []
    for i in range(int(rng.integers(3, 5))):
        w = int(rng.integers(width // 6, width // 3))
        h = int(rng.integers(height // 5, height // 2))
        shapes.append(Shape(
            kind="tri" if i % 2 else "rect",
            x=float(rng.integers(2, width - w - 2)),
            y=float(rng.integers(2, height - h - 2)),
            w=w, h=h,
            vx=float(rng.choice([-1, 0, 1])) / 8.0,
            vy=float(rng.choice([-1, 0, 1])) / 8.0,
            gray=int(grays[1 + i % 4]),
        ))
    return Jingle(program_id, channel, int(grays[0]), shapes, length, width, height)


def degrade(frame: np.ndarray, rng: np.random.Generator, noise_amp: int, blur: bool) -> np.ndarray:
    """3x3 box blur then uniform integer noise in ``[-noise_amp, noise_amp]``."""
    out = frame.astype(np.float64)
    if blur:
        out = ndimage.uniform_filter(out, size=3, mode="nearest")
    out = np.floor(out + 0.5)
    if noise_amp:
        out += rng.integers(-noise_amp, noise_amp + 1, size=out.shape)
    return np.clip(out, 0, 255).astype(np.uint8)


@dataclass
class CorpusSpec:
    jingles: int = 10
    streams: int = 5
    seed: int = 7
    width: int = 64
    height: int = 48
    stream_length: int = 2000
    jingle_length: int = 60
    plants_per_jingle: int = 2
    noise_amp: int = 0
    blur: bool = False
    confusers: int = 0
    channels: tuple[str, ...] = ("TV1", "TV2")


@dataclass
class Corpus:
    root: Path
    jingles: list[Jingle]
    truth: list[tuple[str, int, str]]
    confusers: list[tuple[str, int, str]] = field(default_factory=list)

    def stream_paths(self) -> list[Path]:
        return sorted((self.root / "streams").glob("*.y4m"))


def _place(rng, n: int, length: int, stream_length: int) -> list[int]:
    """``n`` non-overlapping offsets, one per equal slot of the stream."""
    slot = stream_length // max(n, 1)
    if slot < length + 40:
        raise ValueError(f"stream of {stream_length} frames cannot hold {n} plants of {length}")
    return [i * slot + 20 + int(rng.integers(0, slot - length - 40 + 1)) for i in range(n)]


def generate_corpus(out: str | Path, spec: CorpusSpec = CorpusSpec()) -> Corpus:
    """Write a corpus under ``out``; identical ``spec`` gives identical bytes."""
    root = Path(out)
    n_plants = spec.jingles * spec.plants_per_jingle + spec.confusers
    per = -(-n_plants // max(spec.streams, 1))
    if spec.streams < 1 or spec.stream_length // max(per, 1) < spec.jingle_length + 40:
        raise ValueError(f"{spec.streams} streams of {spec.stream_length} frames cannot hold "
                         f"{n_plants} plants of {spec.jingle_length} frames")
    rng = np.random.default_rng(spec.seed)
    jingles = [make_jingle(rng, f"J{i:02d}", spec.channels[i % len(spec.channels)],
                           spec.width, spec.height, spec.jingle_length)
               for i in range(spec.jingles)]

    (root / "jingles").mkdir(parents=True, exist_ok=True)
    with open(root / "jingles.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("program_id", "channel", "path"))
        for j in jingles:
            d = root / "jingles" / j.program_id
            d.mkdir(exist_ok=True)
            for t, img in enumerate(j.frames()):
                write_pgm(d / f"frame_{t:06d}.pgm", img)
            writer.writerow((j.program_id, j.channel, f"jingles/{j.program_id}"))

    # plant list: every jingle k times, plus near-duplicate confusers
    plants = [(j, False) for j in jingles for _ in range(spec.plants_per_jingle)]
    for c in range(spec.confusers):
        base = jingles[c % len(jingles)]
        px, py = int(rng.integers(4, spec.width - 10)), int(rng.integers(4, spec.height - 10))
        twin = Jingle(base.program_id, base.channel, base.background, base.shapes,
                      base.length, base.width, base.height,
                      patch=(px, py, int(255 - base.background)))
        plants.append((twin, True))
    order = rng.permutation(len(plants))
    per_stream: list[list] = [[] for _ in range(spec.streams)]
    for n, idx in enumerate(order):
        per_stream[n % spec.streams].append(plants[idx])

    (root / "streams").mkdir(exist_ok=True)
    truth, confusers = [], []
    for s, items in enumerate(per_stream):
        name = f"streams/stream_{s:02d}.y4m"
        offsets = _place(rng, len(items), spec.jingle_length, spec.stream_length)
        noise = rng.integers(0, 256, size=(spec.stream_length, spec.height, spec.width),
                             dtype=np.uint8)
        for (j, is_twin), off in zip(items, offsets):
            noise[off:off + j.length] = np.stack(j.frames())
            (confusers if is_twin else truth).append((name, off, j.program_id))
        frames = (degrade(f, rng, spec.noise_amp, spec.blur) if spec.noise_amp or spec.blur else f
                  for f in noise)
        write_y4m(root / name, frames)

    truth.sort()
    confusers.sort()
    write_truth(root / "truth.csv", truth)
    with open(root / "confusers.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("stream_path", "offset", "like"))
        writer.writerows(confusers)
    return Corpus(root, jingles, truth, confusers)


def write_truth(path: str | Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRUTH_HEADER)
        writer.writerows(rows)


def read_truth(path: str | Path) -> list[tuple[str, int, str]]:
    """Rows of a truth CSV as ``(stream_path, offset, program_id)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRUTH_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRUTH_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 fields")
            rows.append((row[0], int(row[1]), row[2]))
    return rows


def read_jingles(path: str | Path) -> list[tuple[str, str, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [tuple(row) for row in reader]


def sign_jingles(root: str | Path, params=None, n_frame: int | None = None,
                 t_step: int | None = None, **entry_kwargs):
    """Catalogue every jingle listed in ``root/jingles.csv``, signed from frame 0."""
    from .catalogue import Catalogue, CatalogueEntry
    from .frameio import open_frame_source
    from .signature import DEFAULT_N_FRAME, DEFAULT_T_STEP, DescriptorParams, sign_segment

    root = Path(root)
    params = params or DescriptorParams()
    catalogue = Catalogue()
    for program_id, channel, rel in read_jingles(root / "jingles.csv"):
        with open_frame_source(root / rel) as src:
            vsig = sign_segment(src, 0, n_frame or DEFAULT_N_FRAME, t_step or DEFAULT_T_STEP, params)
        catalogue.add(CatalogueEntry(program_id, channel, vsig, **entry_kwargs))
    return catalogue
