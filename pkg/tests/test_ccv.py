import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from jingleprint.ccv import CcvSignature, ccv_similarity, compute_ccv, default_tau
from jingleprint.corpus import make_jingle
from jingleprint.frameio import GrayFrame
from jingleprint.preprocess import median_filter_3x3, quantize
from jingleprint.srm import segment
from jingleprint.signature import frame_signature

from oracles import brute_ccv


def _ccv(values, tau=None, n_colors=64):
    qf = quantize(GrayFrame(values), n_colors)
    rm = segment(qf)
    return compute_ccv(qf, rm, tau or default_tau(values.size)), qf, rm


def test_default_tau():
    assert default_tau(100) == 1
    assert default_tau(3072) == 30
    assert default_tau(5) == 1


def test_uniform_frame():
    sig, qf, _ = _ccv(np.full((10, 10), 130, np.uint8))
    b = 130 * 64 >> 8
    assert sig.pairs[b].tolist() == [100, 0]
    assert sig.pixel_total == 100
    assert np.delete(sig.pairs, b, axis=0).sum() == 0


def test_checkerboard_singletons():
    v = (np.indices((8, 8)).sum(axis=0) % 2 * 252).astype(np.uint8)
    sig, qf, rm = _ccv(v, tau=1)
    assert rm.region_count == 64
    assert sig.pairs[0].tolist() == [0, 32]
    assert sig.pairs[63].tolist() == [0, 32]
    assert sig.pixel_total == 64


def test_strict_tau_boundary():
    # a 4-pixel region with tau=4 is incoherent, with tau=3 coherent
    v = np.zeros((4, 4), np.uint8)
    v[:2, :2] = 252
    qf = quantize(GrayFrame(v), 64)
    labels = np.where(v > 0, 1, 0)
    from jingleprint.srm import RegionMap
    rm = RegionMap(labels, np.array([12, 4]), np.array([0.0, 252.0]))
    assert compute_ccv(qf, rm, 4).pairs[63].tolist() == [0, 4]
    assert compute_ccv(qf, rm, 3).pairs[63].tolist() == [4, 0]


def test_compute_errors():
    qf = quantize(GrayFrame(np.zeros((4, 4), np.uint8)))
    rm = segment(np.zeros((4, 5), np.uint8))
    with pytest.raises(ValueError, match="dimension mismatch"):
        compute_ccv(qf, rm, 1)
    with pytest.raises(ValueError, match="tau"):
        compute_ccv(qf, segment(qf), 0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 20), st.integers(1, 20))), st.integers(1, 10))
def test_matches_brute_count(values, tau):
    sig, qf, rm = _ccv(values, tau=tau)
    assert np.array_equal(sig.pairs, brute_ccv(qf.buckets, rm.labels, 64, tau))
    assert sig.pixel_total == values.size


def test_similarity_examples():
    a = CcvSignature([[60, 40]])
    assert ccv_similarity(a, CcvSignature([[40, 60]])) == pytest.approx(0.8)
    assert ccv_similarity(a, a) == 1.0
    x = CcvSignature([[100, 0], [0, 0]])
    y = CcvSignature([[0, 0], [100, 0]])
    assert ccv_similarity(x, y) == 0.0


def test_similarity_errors():
    with pytest.raises(ValueError, match="bucket"):
        ccv_similarity(CcvSignature([[1, 0]]), CcvSignature([[1, 0], [0, 0]]))
    with pytest.raises(ValueError, match="size"):
        ccv_similarity(CcvSignature([[1, 0]]), CcvSignature([[2, 0]]))
    with pytest.raises(ValueError):
        CcvSignature([[-1, 2]])


def _pair(n_colors, total):
    def build(cuts):
        cuts = sorted(cuts)
        parts = np.diff([0, *cuts, total])
        return CcvSignature(np.array(parts).reshape(n_colors, 2))
    cut = st.lists(st.integers(0, total), min_size=2 * n_colors - 1, max_size=2 * n_colors - 1)
    return st.tuples(cut.map(build), cut.map(build))


@settings(max_examples=300)
@given(st.integers(1, 8).flatmap(lambda n: _pair(n, 200)))
def test_similarity_properties(pair):
    a, b = pair
    s = ccv_similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == ccv_similarity(b, a)
    assert (s == 1.0) == (a == b)


def test_noise_robustness():
    rng = np.random.default_rng(5)
    worst = 1.0
    for i in range(6):
        frame = make_jingle(rng, f"J{i}", "TV", 64, 48, 1).render(0)
        noisy = np.clip(frame.astype(int) + rng.integers(-2, 3, frame.shape), 0, 255).astype(np.uint8)
        a = frame_signature(GrayFrame(frame)).ccv
        b = frame_signature(GrayFrame(noisy)).ccv
        worst = min(worst, ccv_similarity(a, b))
    assert 1.0 - worst < 0.1
