import numpy as np
import pytest

from jingleprint.frameio import GrayFrame

ACCEPTANCE_RESULTS = []


def record(criterion, passed, detail=""):
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {criterion}: {detail}")


def square_frame(size=24, lo=8, hi=16, shift=0):
    v = np.zeros((size, size), np.uint8)
    v[lo:hi, lo + shift:hi + shift] = 255
    return GrayFrame(v)


@pytest.fixture
def white_square():
    return square_frame()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_jingle(directory, seed=0, length=60, width=64, height=48, program_id="J"):
    """Render one synthetic jingle as a PGM directory and return its frames."""
    from jingleprint.corpus import make_jingle
    from jingleprint.frameio import write_pgm

    jingle = make_jingle(np.random.default_rng(seed), program_id, "TV1", width, height, length)
    frames = jingle.frames()
    directory.mkdir(parents=True, exist_ok=True)
    for t, img in enumerate(frames):
        write_pgm(directory / f"frame_{t:06d}.pgm", img)
    return frames


def write_stream(path, frames):
    from jingleprint.frameio import write_y4m

    write_y4m(path, frames)
    return path


def noise_frames(n, rng, width=64, height=48):
    return list(rng.integers(0, 256, (n, height, width), dtype=np.uint8))
