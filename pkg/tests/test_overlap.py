import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftalign.overlap import (
    EmptyOverlapError,
    assemble_scores,
    build_prefix_tables,
    corner_sum_table,
    oracle_score_grid,
    overlap,
    pick_best,
    score_oracle,
    template_sum_table,
)
from shiftalign.xcorr import compute_corr_grid

from conftest import loop_score

A = np.array([[1.0, 2.0], [3.0, 4.0]])
B = np.array([[4.0, 3.0], [2.0, 1.0]])


def enumerate_overlap(m, n, s, t):
    return {
        (i, j)
        for i in range(m)
        for j in range(n)
        if 0 <= i + s < m and 0 <= j + t < n
    }


def test_overlap_examples():
    assert overlap(4, 4, 1, -2).area == 6
    r = overlap(5, 7, 0, 0)
    assert r.area == 35 and r.rows == (0, 5) and r.cols == (0, 7)
    r = overlap(2, 2, -1, -1)
    # 1-based {(2, 2)} is 0-based {(1, 1)}
    assert r.area == 1 and r.rows == (1, 2) and r.cols == (1, 2)


def test_overlap_area_matches_enumeration():
    for m in range(1, 9):
        for n in range(1, 9):
            for s in range(-(m - 1), m):
                for t in range(-(n - 1), n):
                    r = overlap(m, n, s, t)
                    cells = enumerate_overlap(m, n, s, t)
                    assert r.area == len(cells) == (m - abs(s)) * (n - abs(t))
                    rows, cols = r.template_slices()
                    assert cells == {
                        (i, j) for i in range(rows.start, rows.stop) for j in range(cols.start, cols.stop)
                    }


@pytest.mark.parametrize("s, t", [(3, 0), (0, -4), (4, 4)])
def test_overlap_empty(s, t):
    with pytest.raises(EmptyOverlapError):
        overlap(3, 4, s, t)


def test_score_oracle_examples(rng):
    x = rng.random((6, 5))
    assert score_oracle(x, x, 0, 0) == 0
    assert score_oracle(A, B, 0, 0) == 5
    assert score_oracle(A, A, 1, 1) == 9


def test_score_oracle_errors():
    with pytest.raises(ValueError):
        score_oracle(A, np.zeros((2, 3)), 0, 0)
    with pytest.raises(EmptyOverlapError):
        score_oracle(A, B, 2, 0)


def test_score_oracle_matches_loop(rng):
    for _ in range(20):
        m, n = rng.integers(1, 8, size=2)
        a, b = rng.normal(size=(m, n)), rng.normal(size=(m, n))
        s, t = int(rng.integers(-(m - 1), m)), int(rng.integers(-(n - 1), n))
        assert score_oracle(a, b, s, t) == pytest.approx(loop_score(a.tolist(), b.tolist(), s, t), rel=1e-12)


def test_swap_maps_to_negated_shift(rng):
    a, b = rng.random((7, 9)), rng.random((7, 9))
    for s in range(-6, 7):
        for t in range(-8, 9):
            assert score_oracle(a, b, s, t) == score_oracle(b, a, -s, -t)


def test_prefix_table_examples():
    ones = np.ones((2, 2))
    tables = build_prefix_tables(ones, ones, 2)
    assert tables.at(-1, -1)[0] == 1
    x = np.arange(12.0).reshape(3, 4)
    assert build_prefix_tables(x, x, 2).at(0, 0) == (np.sum(x * x), np.sum(x * x))


def test_prefix_table_random_10x10_exact(rng):
    a = rng.integers(0, 4096, size=(10, 10)).astype(float)
    b = rng.integers(0, 4096, size=(10, 10)).astype(float)
    tables = build_prefix_tables(a, b, 5)
    for s in range(-4, 5):
        for t in range(-4, 5):
            r = overlap(10, 10, s, t)
            assert tables.at(s, t) == (
                np.sum(a[r.frame_slices()] ** 2),
                np.sum(b[r.template_slices()] ** 2),
            )
    assert np.all(tables.sq_a >= 0) and np.all(tables.sq_b >= 0)


def test_prefix_table_symmetries(rng):
    a = rng.integers(0, 100, size=(9, 6)).astype(float)
    w = 5
    sq_a = corner_sum_table(a, w)
    # template-side sum of the rotated frame at the same shift
    assert np.array_equal(sq_a, template_sum_table(a[::-1, ::-1], w))
    # template-side sum of the frame itself at the negated shift
    assert np.array_equal(sq_a, template_sum_table(a, w)[::-1, ::-1])


def test_rotated_negated_symmetry_does_not_hold():
    a = np.arange(25.0).reshape(5, 5)
    sq_a = corner_sum_table(a, 3)
    rotated_negated = template_sum_table(a[::-1, ::-1], 3)[::-1, ::-1]
    assert sq_a[4, 2] != rotated_negated[4, 2]


def test_prefix_table_bound_errors():
    with pytest.raises(ValueError):
        build_prefix_tables(A, A, 3)
    with pytest.raises(ValueError):
        build_prefix_tables(A, A, 0)


def test_assemble_hand_example():
    tables = build_prefix_tables(A, B, 1)
    assert tables.at(0, 0) == (30.0, 30.0)
    grid = assemble_scores(tables, np.array([[20.0]]), 1, (2, 2))
    assert grid.at(0, 0) == 5


def test_assemble_perfect_match_is_zero(rng):
    a = rng.random((16, 16)) * 1000
    grid = assemble_scores(build_prefix_tables(a, a, 6), compute_corr_grid(a, a, 6), 6, a.shape)
    assert grid.at(0, 0) == 0
    assert np.all(grid.values >= 0)


def test_assemble_range_mismatch(rng):
    a = rng.random((8, 8))
    with pytest.raises(ValueError):
        assemble_scores(build_prefix_tables(a, a, 3), compute_corr_grid(a, a, 4), 3, a.shape)


@settings(max_examples=60, deadline=None)
@given(
    m=st.integers(2, 20),
    n=st.integers(2, 20),
    data=st.data(),
    seed=st.integers(0, 2**32 - 1),
)
def test_fast_scores_match_oracle(m, n, data, seed):
    w = data.draw(st.integers(1, min(m, n)))
    r = np.random.default_rng(seed)
    a, b = r.normal(size=(m, n)), r.normal(size=(m, n))
    fast = assemble_scores(build_prefix_tables(a, b, w), compute_corr_grid(a, b, w), w, (m, n))
    np.testing.assert_allclose(fast.values, oracle_score_grid(a, b, w), rtol=1e-9)


def test_pick_best_tie_break():
    v = np.zeros((5, 5))
    assert pick_best(v, 2, 2)[:2] == (0, 0)
    v = np.ones((5, 5))
    v[0, 2] = v[4, 2] = v[2, 0] = 0
    # (-2, 0), (2, 0) and (0, -2) tie on |s| + |t|; lexicographic picks (-2, 0)
    assert pick_best(v, 2, 2)[:2] == (-2, 0)
    v[np.isclose(v, 0)] = np.inf
    v[3, 3] = 0.5
    assert pick_best(v, 2, 2)[:2] == (1, 1)


def _prefix_time(size, w, repeats=15):
    a = np.random.default_rng(0).random((size, size))
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        build_prefix_tables(a, a, w)
        best = min(best, time.perf_counter() - start)
    return best


@pytest.mark.slow
def test_prefix_tables_linear_time():
    ratio = _prefix_time(1024, 16) / _prefix_time(512, 16)
    assert 3 <= ratio <= 6, ratio
