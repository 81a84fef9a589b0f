from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jingleprint.catalogue import Catalogue, CatalogueEntry
from jingleprint.frameio import open_frame_source
from jingleprint.identifier import (Detection, ParameterMismatch, ScanConfig, compare_frames,
                                    frame_decision, fused_similarity, merge_detections,
                                    read_report, scan_stream, signature_threshold, window_match,
                                    write_report)
from jingleprint.signature import DescriptorParams, frame_signature, sign_segment

from conftest import noise_frames, write_jingle, write_stream

sims = st.floats(0, 1)
weights = st.floats(0.01, 10)


def test_fused_examples():
    assert fused_similarity(1.0, 1.0, 0.3, 2.0) == 1.0
    assert fused_similarity(0.8, 0.6, 0.89, 0.92) == pytest.approx(0.69834, abs=1e-5)
    assert fused_similarity(0.123456789, 0.9, 1.0, 0.0) == 0.123456789
    with pytest.raises(ValueError):
        fused_similarity(0.5, 0.5, 0.0, 0.0)


def test_threshold_examples():
    assert signature_threshold(0.85, 0.70, 0.89, 0.92) == pytest.approx(0.77376, abs=1e-5)
    assert frame_decision(1.0, 0.85, 0.70, 1, 1) == 1
    th = signature_threshold(0.85, 0.70, 0.89, 0.92)
    assert frame_decision(th, 0.85, 0.70, 0.89, 0.92) == 0
    assert frame_decision(np.nextafter(th, 2), 0.85, 0.70, 0.89, 0.92) == 1


@settings(max_examples=300)
@given(sims, sims, weights, weights, st.sampled_from([0.1, 1.0, 10.0]))
def test_weighted_mean_and_scale_invariance(a, b, wa, wb, c):
    f = fused_similarity(a, b, wa, wb)
    assert min(a, b) - 1e-12 <= f <= max(a, b) + 1e-12
    assert fused_similarity(a, b, c * wa, c * wb) == pytest.approx(f, abs=1e-12)


def test_merge_detections():
    raw = [Detection(100, "J", 0.91), Detection(101, "J", 0.95), Detection(110, "J", 0.95),
           Detection(130, "J", 0.9), Detection(101, "K", 0.8)]
    merged = merge_detections(raw, {"J": 12, "K": 12})
    assert merged == [Detection(101, "J", 0.95), Detection(101, "K", 0.8),
                      Detection(130, "J", 0.9)]


def test_report_examples(tmp_path):
    write_report([], tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text() == "stream_offset,program_id,score\n"
    write_report([Detection(500, "J", 0.93214)], tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text() == "stream_offset,program_id,score\n500,J,0.9321\n"
    assert read_report(tmp_path / "b.csv") == [Detection(500, "J", 0.9321)]
    with pytest.raises(ValueError, match="detections must be sorted"):
        write_report([Detection(5, "J", 1.0), Detection(1, "J", 1.0)], tmp_path / "c.csv")


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("ident")
    j = write_jingle(root / "J", seed=3, length=60)
    k = write_jingle(root / "K", seed=4, length=60, program_id="K")
    rng = np.random.default_rng(0)
    planted = noise_frames(600, rng)
    planted[500:560] = j
    write_stream(root / "planted.y4m", planted)
    other = noise_frames(200, rng)
    other[100:160] = k
    write_stream(root / "other.y4m", other)
    write_stream(root / "short.y4m", j[:48])
    cat = Catalogue()
    for pid in ("J", "K"):
        with open_frame_source(root / pid) as src:
            cat.add(CatalogueEntry(pid, "TV1", sign_segment(src)))
    return root, cat


def only(cat, pid):
    return Catalogue({pid: cat[pid]})


def scan(path, cat, **kw):
    with open_frame_source(path) as src:
        return scan_stream(src, cat, ScanConfig(**kw))


def test_planted_detection(world):
    root, cat = world
    res = scan(root / "planted.y4m", only(cat, "J"))
    assert res.detections == [Detection(500, "J", 1.0)]
    assert res.frames_read == 600


def test_stride(world):
    root, cat = world
    for stride in (5, 7):
        dets = scan(root / "planted.y4m", only(cat, "J"), stride=stride).detections
        # the first grid offset inside the jingle; earlier ones start on noise
        assert len(dets) == 1
        assert dets[0].stream_offset == -(-500 // stride) * stride


def test_other_jingle_not_detected(world):
    root, cat = world
    assert scan(root / "other.y4m", only(cat, "J")).detections == []
    assert scan(root / "other.y4m", cat).detections == [Detection(100, "K", 1.0)]


def test_short_stream(world):
    root, cat = world
    assert scan(root / "short.y4m", only(cat, "J")).detections == []


def test_self_detection(world):
    root, cat = world
    assert scan(root / "J", only(cat, "J")).detections == [Detection(0, "J", 1.0)]


def test_cache_and_jobs_transparent(world):
    root, cat = world
    base = scan(root / "other.y4m", cat).detections
    assert scan(root / "other.y4m", cat, cache=False).detections == base
    assert scan(root / "other.y4m", cat, jobs=2, batch=16).detections == base


def test_trace_and_undefined(world):
    root, cat = world
    res = scan(root / "other.y4m", cat, trace=True, emit_undefined=True, stride=10)
    assert [o for o, _ in res.trace["K"]] == list(range(0, 152, 10))
    assert dict(res.trace["K"])[100] == 1.0
    assert 100 not in res.undefined and 0 in res.undefined


def test_parameter_mismatch(world, tmp_path):
    root, cat = world
    with pytest.raises(ParameterMismatch, match="t_step"):
        scan(root / "other.y4m", cat, t_step=25)
    with pytest.raises(ParameterMismatch, match="n_frame"):
        scan(root / "other.y4m", cat, n_frame=4)
    with pytest.raises(ParameterMismatch, match="scanner params"):
        scan(root / "other.y4m", cat, params=DescriptorParams(q=64))
    scan(root / "short.y4m", cat, params=DescriptorParams())
    write_stream(tmp_path / "big.y4m", [np.zeros((48, 80), np.uint8)] * 60)
    with pytest.raises(ParameterMismatch, match="80x48"):
        scan(tmp_path / "big.y4m", cat)
    with open_frame_source(root / "K") as src:
        other = sign_segment(src, params=DescriptorParams(n_poi=10))
    mixed = Catalogue({"J": cat["J"], "K2": CatalogueEntry("K2", "TV1", other)})
    with pytest.raises(ParameterMismatch, match="signed with"):
        scan(root / "short.y4m", mixed)
    with pytest.raises(ParameterMismatch, match="empty"):
        scan(root / "short.y4m", Catalogue())


def _window(world):
    root, cat = world
    entry = cat["J"]
    with open_frame_source(root / "J") as src:
        sigs = {f.index: frame_signature(f, entry.vsig.params) for f in src}
    return entry, sigs.__getitem__


@pytest.mark.parametrize("forced", range(5))
def test_all_or_nothing(world, forced):
    entry, observed = _window(world)
    assert window_match(entry, observed, 0) == Detection(0, "J", 1.0)
    veto = lambda e, i, k, d: 0 if i == forced else d
    assert window_match(entry, observed, 0, hook=veto) is None


def test_forcing_all_on_produces_detection(world):
    entry, observed = _window(world)
    # offset 1 falls between samples; forcing every decision still yields a detection
    det = window_match(entry, observed, 1, hook=lambda e, i, k, d: 1)
    assert det is not None and det.stream_offset == 1 and 0 < det.score <= 1


def test_poi_shortcut_matches_exact(world):
    entry, observed = _window(world)
    strict = replace(entry, th_ccv=0.999, th_poi=0.999)
    for k in (0, 3, 17):
        fast = compare_frames(strict, 0, observed(k))
        exact = compare_frames(strict, 0, observed(k), exact=True)
        assert fast[0] == exact[0]
        assert fast[1] is None or fast[1] == exact[1]
