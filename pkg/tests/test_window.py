import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ngmres.window import WindowState, direct_assembly, window_advance


def _advance(state, rng, n=4):
    r, x, Mr = rng.standard_normal((3, n))
    return window_advance(state, r, x, Mr)


def test_capacity_one_keeps_head_and_one_predecessor():
    rng = np.random.default_rng(0)
    w = _advance(_advance(_advance(WindowState(1), rng), rng), rng)
    assert w.depth == 1
    assert len(w.residuals) == len(w.iterates) == 2


def test_capacity_zero_keeps_only_head():
    rng = np.random.default_rng(0)
    w = _advance(_advance(WindowState(0), rng), rng)
    assert w.depth == 0
    assert w.assemble().shape == (4, 1)


def test_head_is_newest_entry():
    w = window_advance(WindowState(2), np.ones(3), np.zeros(3), np.zeros(3))
    w = window_advance(w, 2 * np.ones(3), np.ones(3), np.zeros(3))
    np.testing.assert_array_equal(w.residuals[0], 2 * np.ones(3))
    np.testing.assert_array_equal(w.iterates[1], np.zeros(3))


def test_full_capacity_never_evicts():
    rng = np.random.default_rng(1)
    w = WindowState(None)
    for _ in range(30):
        w = _advance(w, rng)
    assert w.depth == 29


def test_length_mismatch_raises():
    w = window_advance(WindowState(2), np.ones(3), np.ones(3), np.ones(3))
    with pytest.raises(ValueError):
        window_advance(w, np.ones(4), np.ones(4), np.ones(4))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 6), st.integers(1, 20))
def test_assembly_is_bit_identical_to_direct_construction(seed, capacity, steps):
    rng = np.random.default_rng(seed)
    w = WindowState(capacity)
    for k in range(steps):
        w = _advance(w, rng, n=7)
        assert w.depth == min(k, capacity)
        assert np.array_equal(w.assemble(), direct_assembly(w.residuals, w.Mr))


def test_capacity_ten_stays_bounded_over_fifty_advances():
    rng = np.random.default_rng(2)
    w = WindowState(10)
    for _ in range(50):
        w = _advance(w, rng)
        assert len(w.residuals) <= 11 and len(w.iterates) <= 11
    assert len(w.residuals) == 11
