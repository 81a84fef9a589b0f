import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jingleprint.corpus import make_jingle
from jingleprint.frameio import GrayFrame
from jingleprint.poi import (Poi, PoiSignature, detect_pois, gaussian_kernel, harris_response,
                             match_points, poi_similarity, select_points)

from conftest import square_frame

CORNERS = [(8, 8), (15, 8), (8, 15), (15, 15)]


def _near_corner(p, tol=2):
    return min(max(abs(p.x - cx), abs(p.y - cy)) for cx, cy in CORNERS) <= tol


def test_gaussian_kernel():
    k = gaussian_kernel(1.0)
    assert len(k) == 7
    assert k.sum() == pytest.approx(1.0)
    assert np.allclose(k, k[::-1])
    assert len(gaussian_kernel(0.5)) == 5


def test_constant_frame():
    f = GrayFrame(np.full((20, 20), 77, np.uint8))
    assert not harris_response(f).any()
    assert len(detect_pois(f)) == 0


def test_too_small():
    with pytest.raises(ValueError, match="too small"):
        harris_response(GrayFrame(np.zeros((2, 5), np.uint8)))


def test_vertical_step_no_positive_response_on_edge():
    v = np.zeros((16, 16), np.uint8)
    v[:, 8:] = 200
    r = harris_response(GrayFrame(v))
    assert r[4:12, 5:11].max() <= 1e-12
    assert np.abs(r).max() == pytest.approx(1.0)


def test_square_local_maxima_near_corners(white_square):
    r = harris_response(white_square)
    for cx, cy in CORNERS:
        win = r[cy - 2:cy + 3, cx - 2:cx + 3]
        assert win.max() > 0.5


def test_square_four_points(white_square):
    sig = detect_pois(white_square, n_poi=4, nms_radius=3)
    assert len(sig) == 4
    pts = list(sig)
    assert all(_near_corner(p) for p in pts)
    # one per corner
    assigned = {min(range(4), key=lambda c: abs(p.x - CORNERS[c][0]) + abs(p.y - CORNERS[c][1]))
                for p in pts}
    assert assigned == {0, 1, 2, 3}
    assert all(0 <= p.response <= 1 for p in pts)


def test_default_square_strongest_four_are_corners(white_square):
    sig = detect_pois(white_square)
    assert all(_near_corner(p) for p in list(sig)[:4])
    assert sig.responses[0] == 1.0


def test_nms_spacing_and_order(rng):
    f = GrayFrame(rng.integers(0, 256, (40, 40)).astype(np.uint8))
    sig = detect_pois(f, n_poi=50, nms_radius=3)
    assert 0 < len(sig) <= 50
    assert (np.diff(sig.responses) <= 0).all()
    pts = np.stack([sig.xs, sig.ys], axis=1)
    d2 = ((pts[:, None] - pts[None]) ** 2).sum(-1)
    np.fill_diagonal(d2, 99)
    assert d2.min() > 9
    assert sig.xs.min() >= 3 and sig.xs.max() < 37 and sig.ys.min() >= 3 and sig.ys.max() < 37


def test_n_poi_one_is_global_max(rng):
    f = GrayFrame(rng.integers(0, 256, (30, 30)).astype(np.uint8))
    r = harris_response(f)
    inner = np.full_like(r, -np.inf)
    inner[3:-3, 3:-3] = r[3:-3, 3:-3]
    y, x = np.unravel_index(np.argmax(inner), r.shape)
    (p,) = list(detect_pois(f, n_poi=1))
    assert (p.x, p.y) == (x, y)
    with pytest.raises(ValueError):
        select_points(r, 0, 3)


def test_translation_shifts_points_by_at_most_one():
    a = detect_pois(square_frame(size=32), n_poi=4)
    b = detect_pois(square_frame(size=32, shift=1), n_poi=4)
    for p in a:
        assert min(abs(q.x - (p.x + 1)) + abs(q.y - p.y) for q in b) <= 1


def _sig(points):
    return PoiSignature.from_points(sorted(points, key=lambda p: -p.response))


def test_similarity_examples():
    a = _sig([Poi(5, 5, 0.9), Poi(20, 5, 0.8), Poi(5, 20, 0.7), Poi(20, 20, 0.6)])
    assert poi_similarity(a, a) == 1.0
    far = _sig([Poi(p.x + 4, p.y, p.response) for p in a])
    assert poi_similarity(a, far) == 0.0
    three = _sig([Poi(5, 5, 0.9), Poi(20, 5, 0.8), Poi(5, 20, 0.7), Poi(30, 20, 0.6)])
    assert poi_similarity(a, three) == 0.75
    assert poi_similarity(PoiSignature.empty(), a) == 0.0
    assert poi_similarity(a, PoiSignature.empty()) == 0.0


def test_harris_tolerance_strict():
    a = _sig([Poi(5, 5, 0.5)])
    assert poi_similarity(a, _sig([Poi(5, 5, 0.55)])) == 1.0
    assert poi_similarity(a, _sig([Poi(5, 5, 0.75)])) == 0.0


def test_matching_is_one_to_one_and_nearest():
    a = _sig([Poi(5, 5, 0.9), Poi(6, 5, 0.8)])
    b = _sig([Poi(6, 5, 0.85)])
    assert match_points(a, b) == [(0, 0)]
    assert poi_similarity(a, b) == 0.5
    c = _sig([Poi(8, 5, 0.9), Poi(5, 6, 0.85)])
    assert match_points(_sig([Poi(5, 5, 0.9)]), c) == [(0, 1)]


def test_signature_must_be_sorted():
    with pytest.raises(ValueError, match="descending"):
        PoiSignature([1, 2], [1, 2], [0.1, 0.5])


coords = st.integers(0, 30)
points = st.lists(st.builds(Poi, coords, coords, st.floats(0, 1).map(lambda r: round(r, 6))),
                  max_size=12)


@settings(max_examples=200)
@given(points, points)
def test_similarity_bounds(pa, pb):
    a, b = _sig(pa), _sig(pb)
    s = poi_similarity(a, b)
    assert 0.0 <= s <= 1.0
    pairs = match_points(a, b)
    assert len({j for _, j in pairs}) == len(pairs)
    if len(a):
        assert poi_similarity(a, a) == 1.0


def test_illumination_robustness():
    rng = np.random.default_rng(3)
    for i in range(6):
        frame = make_jingle(rng, f"J{i}", "TV", 64, 48, 1).render(0)
        dim = np.floor(frame * 0.8 + 0.5).astype(np.uint8)
        a = detect_pois(GrayFrame(frame))
        b = detect_pois(GrayFrame(dim))
        assert poi_similarity(a, b) >= 0.8
