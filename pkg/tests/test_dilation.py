import numpy as np
import pytest

from crackforge.dilation import (DilationProfile, _dilate_slice_2x2,
                                 adaptive_dilate, dilate_fixed_width,
                                 sample_dilation_profile)
from crackforge.errors import VolumeError
from crackforge.volume import BinaryMask


def test_profile_starts_at_zero_with_unit_increments():
    for seed in range(50):
        prof = sample_dilation_profile(30, 0.5, seed)
        assert prof.counts[0] == 0
        steps = np.diff(prof.counts)
        assert set(np.unique(steps)) <= {0, 1}


def test_profile_binomial_moments():
    vals = np.array([sample_dilation_profile(11, 0.5, seed).counts[10]
                     for seed in range(1000)])
    # Binomial(10, 0.5): mean 5, variance 2.5
    assert abs(vals.mean() - 5.0) <= 3 * np.sqrt(2.5 / 1000)
    assert abs(vals.var() - 2.5) <= 3 * np.sqrt(2 * 2.5 ** 2 / 999)


def test_profile_validation():
    with pytest.raises(VolumeError):
        sample_dilation_profile(10, 0.0, 0)
    with pytest.raises(VolumeError):
        sample_dilation_profile(10, 1.0, 0)
    with pytest.raises(VolumeError):
        DilationProfile(p=0.5, counts=np.array([1, 1]), seed=0)
    with pytest.raises(VolumeError):
        DilationProfile(p=0.5, counts=np.array([0, 2]), seed=0)


def test_vanishing_p_leaves_mask_unchanged():
    rng = np.random.default_rng(0)
    mask = BinaryMask(rng.random((8, 8, 8)) < 0.2)
    out, prof = adaptive_dilate(mask, p=1e-12, seed=3)
    assert prof.counts.max() == 0
    assert np.array_equal(out.bits, mask.bits)


def test_single_pixel_grows_toward_plus_axes():
    # brute-force dilation of a single pixel, k constant iterations
    for k in (1, 2, 3):
        plane = np.zeros((10, 10), dtype=bool)
        plane[4, 4] = True
        out = _dilate_slice_2x2(plane, k)
        expected = np.zeros((10, 10), dtype=bool)
        expected[4:5 + k, 4:5 + k] = True
        assert np.array_equal(out, expected)


def test_adaptive_dilate_contains_input():
    rng = np.random.default_rng(1)
    mask = BinaryMask(rng.random((12, 12, 12)) < 0.1)
    out, _ = adaptive_dilate(mask, p=0.5, seed=7)
    assert np.all(out.bits[mask.bits])


def test_adaptive_dilate_deterministic():
    rng = np.random.default_rng(2)
    mask = BinaryMask(rng.random((10, 10, 10)) < 0.1)
    a, pa = adaptive_dilate(mask, p=0.3, seed=11)
    b, pb = adaptive_dilate(mask, p=0.3, seed=11)
    assert np.array_equal(a.bits, b.bits)
    assert np.array_equal(pa.counts, pb.counts)


def test_fixed_width_on_flat_plane():
    bits = np.zeros((8, 8, 8), dtype=bool)
    bits[:, :, 4] = True
    for width in (1, 3, 5):
        out = dilate_fixed_width(BinaryMask(bits), width)
        zs = np.unique(np.argwhere(out.bits)[:, 2])
        assert len(zs) == width
        assert zs.min() == 4 - (width - 1) // 2


def test_fixed_width_validation():
    mask = BinaryMask(np.zeros((4, 4, 4), dtype=bool))
    for bad in (0, 2, 4, -1):
        with pytest.raises(VolumeError):
            dilate_fixed_width(mask, bad)
