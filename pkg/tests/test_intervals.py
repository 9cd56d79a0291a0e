"""Interval ladder construction and split-point bookkeeping."""
import pytest

from locpar import (
    BadRatioError,
    GridTooLongError,
    IndexOutOfRangeError,
    InvalidArgumentError,
    build_grid,
    ladder_lengths,
    max_scales,
)


def test_ladder_recurrence_examples():
    assert build_grid(100, 5, 1.41, 4).lengths == (5, 7, 9, 14)
    assert build_grid(100, 5, 1.0001, 3).lengths == (5, 6, 7)
    assert build_grid(30, 10, 1.25, 6).lengths == (10, 12, 15, 19, 24, 30)


def test_grid_too_long():
    with pytest.raises(GridTooLongError):
        build_grid(10, 5, 2.0, 3)  # needs 20 points


def test_bad_ratio_and_arguments():
    with pytest.raises(BadRatioError):
        build_grid(100, 5, 1.0, 3)
    with pytest.raises(BadRatioError):
        build_grid(100, 5, 3.5, 3)
    with pytest.raises(InvalidArgumentError):
        build_grid(100, 1, 1.5, 3)
    with pytest.raises(InvalidArgumentError):
        ladder_lengths(5, 1.5, 0)


def test_interval_positions():
    grid = build_grid(100, 5, 1.41, 4)
    assert (grid.interval(1).start, grid.interval(1).end) == (96, 100)
    assert (grid.interval(4).start, grid.interval(4).end) == (87, 100)
    with pytest.raises(IndexOutOfRangeError):
        grid.interval(0)
    with pytest.raises(IndexOutOfRangeError):
        grid.interval(5)


def test_interval_slice_is_zero_based():
    grid = build_grid(10, 3, 1.5, 2)
    iv = grid.interval(1)  # [8, 10] one-based
    assert iv.slice == slice(7, 10)
    assert iv.length == 3


def test_tested_set_examples():
    grid = build_grid(100, 5, 1.41, 2)  # lengths (5, 7)
    assert list(grid.tested_set(1)) == [94, 95]
    tight = build_grid(100, 5, 1.0001, 3)  # lengths (5, 6, 7): singletons
    assert list(tight.tested_set(1)) == [95]
    assert list(tight.tested_set(2)) == [94]
    with pytest.raises(IndexOutOfRangeError):
        tight.tested_set(3)
    with pytest.raises(IndexOutOfRangeError):
        tight.tested_set(0)


def test_nesting_and_split_sizes():
    grid = build_grid(200, 4, 1.6, 7)
    for k in range(1, grid.k_max):
        inner, outer = grid.interval(k), grid.interval(k + 1)
        assert outer.start < inner.start and outer.end == inner.end
        taus = list(grid.tested_set(k))
        assert len(taus) == grid.lengths[k] - grid.lengths[k - 1]
        for tau in taus:
            left_len = tau - outer.start + 1
            right_len = outer.end - tau
            assert left_len >= 1
            assert right_len >= grid.lengths[k - 1]


def test_max_scales_default_build():
    assert max_scales(30, 10, 1.25) == 6
    grid = build_grid(30)  # defaults n0=10, u=1.25, maximal K
    assert grid.k_max == 6 and grid.lengths[-1] <= 30
    grid2 = build_grid(1000)
    assert grid2.lengths[-1] <= 1000
    with pytest.raises(GridTooLongError):
        max_scales(5, 10, 1.25)


def test_reanchoring():
    grid = build_grid(100, 5, 1.41, 4)
    moved = grid.at(50)
    assert moved.lengths == grid.lengths
    assert moved.interval(1).end == 50
    with pytest.raises(GridTooLongError):
        grid.at(10)
