import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyseg.tiling import TileGrid, extract_patches, stitch


def test_exact_tiling_offsets():
    patches = extract_patches(np.zeros((1280, 1280), np.uint8), TileGrid(640, 640))
    assert [(r, c) for _, r, c in patches] == [(0, 0), (0, 640), (640, 0), (640, 640)]


def test_padding_to_lattice():
    grid = TileGrid(640, 640)
    assert grid.padded_size(700) == 1280
    patches = extract_patches(np.ones((700, 700), np.uint8), grid)
    assert len(patches) == 4
    assert all(p.shape == (640, 640) for p, _, _ in patches)


def test_single_patch_identity():
    x = np.random.default_rng(0).random((640, 640))
    (patch, r, c), = extract_patches(x, TileGrid(640))
    assert (r, c) == (0, 0)
    np.testing.assert_array_equal(patch, x)


def test_zero_padding_policy():
    x = np.ones((5, 5))
    patches = extract_patches(x, TileGrid(4, 4, "zero"))
    assert patches[-1][0].sum() == 1  # only (4, 4) comes from the raster


@pytest.mark.parametrize("shape", [(37, 53), (64, 64), (20, 33, 3)])
def test_round_trip_stride_equals_patch(shape):
    rng = np.random.default_rng(1)
    x = rng.random(shape)
    mask = (x > 0.5).astype(np.uint8)
    grid = TileGrid(16)
    for arr in (x, mask):
        back = stitch(extract_patches(arr, grid), shape[0], shape[1], 16, 16)
        assert back.dtype == arr.dtype
        np.testing.assert_array_equal(back, arr)


def test_overlap_of_equal_constants():
    a = np.full((4, 4), 3.0)
    out = stitch([(a, 0, 0), (a, 0, 2)], 4, 6, 2, 4)
    np.testing.assert_array_equal(out, 3.0)


def test_overlap_average():
    out = stitch([(np.zeros((4, 4)), 0, 0), (np.ones((4, 4)), 0, 2)], 4, 6, 2, 4)
    np.testing.assert_array_equal(out[:, :2], 0.0)
    np.testing.assert_array_equal(out[:, 2:4], 0.5)
    np.testing.assert_array_equal(out[:, 4:], 1.0)


def test_off_lattice_rejected():
    with pytest.raises(ValueError, match="lattice"):
        stitch([(np.zeros((4, 4)), 0, 1)], 4, 5, 2, 4)


def test_inconsistent_shapes_rejected():
    with pytest.raises(ValueError):
        stitch([(np.zeros((4, 4)), 0, 0), (np.zeros((3, 4)), 0, 4)], 4, 8, 4, 4)


@pytest.mark.parametrize("kwargs", [dict(patch=0), dict(patch=4, stride=5), dict(patch=4, stride=0)])
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        TileGrid(**kwargs)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 70), st.integers(1, 70), st.integers(1, 24), st.data())
def test_count_formula_and_coverage(h, w, patch, data):
    stride = data.draw(st.integers(1, patch))
    grid = TileGrid(patch, stride)
    patches = extract_patches(np.zeros((h, w)), grid)
    # enumerate start positions until the padded frame covers the raster
    rows = list(itertools.takewhile(lambda r: r == 0 or r - stride + patch < h,
                                    range(0, 10 * (h + patch), stride)))
    cols = list(itertools.takewhile(lambda c: c == 0 or c - stride + patch < w,
                                    range(0, 10 * (w + patch), stride)))
    assert len(patches) == len(rows) * len(cols)
    assert grid.count(h) == len(rows)
    hits = np.zeros((grid.padded_size(h), grid.padded_size(w)), int)
    for _, r, c in patches:
        hits[r:r + patch, c:c + patch] += 1
    assert hits.min() >= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.sampled_from([4, 8]), st.integers(0, 1000))
def test_overlapping_stitch_of_constant_is_constant(h, w, patch, seed):
    grid = TileGrid(patch, patch // 2)
    tiles = extract_patches(np.full((h, w), 0.25), grid)
    out = stitch(tiles, h, w, grid.stride, patch)
    assert np.abs(out - 0.25).max() < 1e-12
