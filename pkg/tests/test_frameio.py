import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jingleprint.frameio import (FrameFormatError, GrayFrame, open_frame_source, read_pnm,
                                 rgb_to_luma, write_pgm, write_ppm, write_y4m)


def test_ppm_directory_counts_frames(tmp_path):
    for i in range(10):
        write_ppm(tmp_path / f"frame_{i:06d}.ppm", np.full((4, 5, 3), i, np.uint8))
    src = open_frame_source(tmp_path, "ppm-sequence")
    assert src.frame_count == 10
    frames = list(src)
    assert [f.index for f in frames] == list(range(10))
    assert frames[7].luma[0, 0] == 7


def test_empty_directory(tmp_path):
    with pytest.raises(FrameFormatError, match="no frames found"):
        open_frame_source(tmp_path, "pgm-sequence")


def test_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError):
        open_frame_source(tmp_path / "nope.y4m")


def _y4m_c420(path, w, h, planes):
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W%d H%d F25:1 Ip A1:1 C420\n" % (w, h))
        for y in planes:
            fh.write(b"FRAME\n")
            fh.write(y.tobytes())
            fh.write(bytes(2 * ((w + 1) // 2) * ((h + 1) // 2)))


def test_y4m_header_and_luma_plane(tmp_path):
    rng = np.random.default_rng(0)
    planes = [rng.integers(0, 256, (48, 64), dtype=np.uint8) for _ in range(3)]
    path = tmp_path / "s.y4m"
    _y4m_c420(path, 64, 48, planes)
    with open_frame_source(path) as src:
        assert (src.width, src.height) == (64, 48)
        frames = list(src)
    assert len(frames) == 3
    for f, y in zip(frames, planes):
        assert np.array_equal(f.luma, y)


def test_y4m_frame_params_and_rewind(tmp_path):
    path = tmp_path / "s.y4m"
    y = np.arange(12, dtype=np.uint8).reshape(3, 4)
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W4 H3 Cmono\n")
        fh.write(b"FRAME Ixyz\n" + y.tobytes())
        fh.write(b"FRAME\n" + (y + 1).tobytes())
    with open_frame_source(path) as src:
        first = list(src)
        src.rewind()
        second = list(src)
    assert first == second
    assert first[1].luma[0, 0] == 1


def test_y4m_truncated_payload(tmp_path):
    path = tmp_path / "t.y4m"
    with open(path, "wb") as fh:
        fh.write(b"YUV4MPEG2 W4 H4 Cmono\nFRAME\n" + bytes(10))
    with open_frame_source(path) as src:
        with pytest.raises(FrameFormatError, match="expected 16 bytes, 10 available"):
            src.next_frame()


def test_y4m_bad_signature_and_colourspace(tmp_path):
    bad = tmp_path / "a.y4m"
    bad.write_bytes(b"YUV4MPEG W4 H4\n")
    with pytest.raises(FrameFormatError, match="signature"):
        open_frame_source(bad)
    odd = tmp_path / "b.y4m"
    odd.write_bytes(b"YUV4MPEG2 W4 H4 C444\n")
    with pytest.raises(FrameFormatError, match="C444"):
        open_frame_source(odd)


def test_ppm_luma_values(tmp_path):
    rgb = np.array([[[255, 255, 255], [255, 0, 0], [0, 0, 0]]], np.uint8)
    write_ppm(tmp_path / "x.ppm", rgb)
    f = read_pnm(tmp_path / "x.ppm")
    # 0.299 * 255 = 76.245
    assert f.luma.tolist() == [[255, 76, 0]]


def test_pgm_passthrough_and_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n2 1 # width height\n255\n\x07\xff")
    assert read_pnm(p).luma.tolist() == [[7, 255]]


def test_pnm_errors(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(FrameFormatError, match="maxval"):
        read_pnm(p)
    p.write_bytes(b"P5\n2 2\n255\n\x00")
    with pytest.raises(FrameFormatError, match="expected 4 bytes, 1 available"):
        read_pnm(p)
    p.write_bytes(b"P2\n2 2\n255\n")
    with pytest.raises(FrameFormatError, match="magic"):
        read_pnm(p)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.randoms(use_true_random=False))
def test_pgm_round_trip(tmp_path_factory, w, h, rnd):
    luma = np.array([[rnd.randrange(256) for _ in range(w)] for _ in range(h)], np.uint8)
    path = tmp_path_factory.mktemp("rt") / "f.pgm"
    write_pgm(path, luma)
    assert np.array_equal(read_pnm(path).luma, luma)


def test_luma_bounds_exhaustive_over_sampled_cube():
    # every 5th level on each axis plus the extremes: 52^3 colours
    levels = np.unique(np.r_[np.arange(0, 256, 5), 255])
    r, g, b = np.meshgrid(levels, levels, levels, indexing="ij")
    luma = rgb_to_luma(np.stack([r, g, b], axis=-1)).astype(int)
    exact = 0.299 * r + 0.587 * g + 0.114 * b
    assert luma.min() >= 0 and luma.max() <= 255
    assert np.abs(luma - exact).max() <= 0.5 + 1e-9


def test_decoding_is_deterministic(tmp_path):
    rng = np.random.default_rng(5)
    write_y4m(tmp_path / "d.y4m", [rng.integers(0, 256, (6, 8), dtype=np.uint8) for _ in range(4)])
    a = list(open_frame_source(tmp_path / "d.y4m"))
    b = list(open_frame_source(tmp_path / "d.y4m"))
    assert a == b


def test_gray_frame_is_immutable():
    f = GrayFrame(np.zeros((2, 3), np.uint8))
    assert (f.width, f.height) == (3, 2)
    with pytest.raises(ValueError):
        f.luma[0, 0] = 1
    with pytest.raises(ValueError):
        GrayFrame(np.full((2, 2), 300))
