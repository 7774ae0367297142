import numpy as np
import pytest

import oracles
from strobo.exceptions import EmptyMask
from strobo.moments import blob_stats, compute_moments


def square():
    m = np.zeros((10, 10), bool)
    m[4:7, 4:7] = True
    return m


def test_square_moments():
    m = compute_moments(square())
    assert m.centroid == (5, 5)
    assert (m.mu20, m.mu02, m.mu11) == (6, 6, 0)


def test_single_pixel():
    m = np.zeros((5, 9), bool)
    m[2, 7] = True
    mom = compute_moments(m)
    assert mom.centroid == (7, 2) and (mom.mu20, mom.mu02, mom.mu11) == (0, 0, 0)


def test_empty():
    with pytest.raises(EmptyMask):
        compute_moments(np.zeros((3, 3), bool))
    with pytest.raises(EmptyMask):
        blob_stats(np.zeros((3, 3), bool), 0)


def test_blob_stats():
    s = blob_stats(square(), 10, 10 / 25)
    assert (s.frame_index, s.area, s.centroid, s.bbox) == (10, 9, (5, 5), (4, 4, 6, 6))
    assert s.timestamp_s == pytest.approx(0.4)
    assert s.csv_row().startswith("10,0.400000,9,5.000000,5.000000,6.000000")


def test_translation(rng):
    for _ in range(30):
        m = np.zeros((40, 40), bool)
        m[5:20, 5:20] = rng.random((15, 15)) < 0.5
        if not m.any():
            continue
        dx, dy = rng.integers(-5, 15, 2)
        moved = np.roll(np.roll(m, dy, axis=0), dx, axis=1)
        a, b = compute_moments(m), compute_moments(moved)
        assert b.centroid == pytest.approx((a.centroid[0] + dx, a.centroid[1] + dy), abs=1e-12)
        assert (b.mu20, b.mu02, b.mu11) == pytest.approx((a.mu20, a.mu02, a.mu11), abs=1e-9)


def test_transpose(rng):
    m = rng.random((13, 21)) < 0.3
    a, b = compute_moments(m), compute_moments(m.T)
    assert (a.mu20, a.mu02, a.mu11) == pytest.approx((b.mu02, b.mu20, b.mu11), abs=1e-12)


def test_against_naive(rng):
    for _ in range(100):
        h, w = rng.integers(1, 25, 2)
        m = rng.random((h, w)) < rng.random()
        if not m.any():
            continue
        got = compute_moments(m)
        want = oracles.naive_moments(m.tolist())
        assert got[:3] == want[:3]
        assert got[3:] == pytest.approx(want[3:], abs=1e-9)


def test_invariants(rng):
    for _ in range(100):
        m = rng.random((15, 15)) < 0.2
        if not m.any():
            continue
        s = blob_stats(m, 0)
        assert s.area == m.sum()
        assert s.mu20 >= 0 and s.mu02 >= 0 and s.mu11**2 <= s.mu20 * s.mu02 + 1e-9
        x0, y0, x1, y1 = s.bbox
        assert x0 <= s.centroid[0] <= x1 and y0 <= s.centroid[1] <= y1
