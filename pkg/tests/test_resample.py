import numpy as np
import pytest

from crackforge.errors import VolumeError
from crackforge.resample import (build_pyramid, downsample, rescale,
                                 upsample_mask_to, upsample_to)
from crackforge.volume import BinaryMask, VoxelVolume


def test_downsample_constant_exact():
    vol = VoxelVolume(np.full((17, 12, 9), 0.37), spacing_um=2.0)
    out = downsample(vol, 2)
    assert out.dims == (9, 6, 5)
    assert out.spacing_um == 4.0
    assert np.allclose(out.data, 0.37, atol=1e-12)


def test_downsample_linear_ramp_interior_exact():
    x = np.arange(32, dtype=np.float64)
    vol = VoxelVolume(np.broadcast_to(x[:, None, None], (32, 8, 8)).copy())
    out = downsample(vol, 2)
    expected = np.arange(out.dims[0]) * 2.0
    interior = slice(1, -1)
    assert np.allclose(out.data[interior, 2, 2], expected[interior], atol=1e-9)


def test_downsample_twice_matches_doubled_and_quadrupled_spacing():
    vol = VoxelVolume(np.zeros((256, 256, 256), dtype=np.float32), spacing_um=1.0)
    once = downsample(vol, 2)
    twice = downsample(once, 2)
    assert once.dims == (128, 128, 128)
    assert once.spacing_um == 2.0
    assert twice.dims == (64, 64, 64)
    assert twice.spacing_um == 4.0


def test_downsample_factor_validation():
    vol = VoxelVolume(np.zeros((8, 8, 8)))
    with pytest.raises(VolumeError):
        downsample(vol, 1)


def test_pyramid_dims_follow_ceil_rule():
    vol = VoxelVolume(np.random.default_rng(0).random((37, 21, 13)))
    pyr = build_pyramid(vol, levels=3, factor=2)
    assert len(pyr) == 3
    for a, b in zip(pyr.levels, pyr.levels[1:]):
        assert b.dims == tuple(-(-n // 2) for n in a.dims)


def test_upsample_same_dims_identity():
    vol = VoxelVolume(np.random.default_rng(1).random((9, 9, 9)))
    out = upsample_to(vol, (9, 9, 9))
    assert np.array_equal(out.data, vol.data)


def test_upsample_constant():
    out = upsample_to(VoxelVolume(np.full((4, 4, 4), 1.25)), (9, 9, 9))
    assert np.allclose(out.data, 1.25)


def test_upsample_rejects_shrinking():
    with pytest.raises(VolumeError):
        upsample_to(VoxelVolume(np.zeros((8, 8, 8))), (4, 8, 8))


def test_mask_upsample_volume_ratio():
    # oracle: brute-force foreground count on random 16^3 masks
    rng = np.random.default_rng(7)
    for _ in range(5):
        bits = rng.random((16, 16, 16)) < 0.4
        up = upsample_mask_to(BinaryMask(bits), (32, 32, 32))
        ratio = up.bits.sum() / bits.sum()
        assert abs(ratio - 8.0) <= 0.8


def test_mask_upsample_identity_and_binary():
    bits = np.random.default_rng(3).random((8, 8, 8)) < 0.2
    same = upsample_mask_to(BinaryMask(bits), (8, 8, 8))
    assert np.array_equal(same.bits, bits)
    up = upsample_mask_to(BinaryMask(bits), (11, 13, 17))
    assert up.bits.dtype == np.bool_


def test_rescale_identity():
    vol = VoxelVolume(np.random.default_rng(2).random((12, 12, 12)))
    out = rescale(vol, 1.0)
    assert out.dims == vol.dims
    assert np.allclose(out.data, vol.data, atol=1e-10)


def test_rescale_up_down_round_trip():
    # smooth test image: rescale(rescale(f, 2), 0.5) ~ f away from boundary
    n = 32
    grid = np.meshgrid(*[np.linspace(0, 2 * np.pi, n)] * 3, indexing="ij")
    data = np.sin(grid[0]) * np.cos(grid[1]) + 0.5 * np.sin(grid[2])
    vol = VoxelVolume(data)
    back = rescale(rescale(vol, 2.0), 0.5)
    assert back.dims == vol.dims
    sl = (slice(4, -4),) * 3
    rel = np.linalg.norm(back.data[sl] - data[sl]) / np.linalg.norm(data[sl])
    assert rel < 0.01


def test_rescale_empty_output_errors():
    vol = VoxelVolume(np.zeros((8, 8, 8)))
    with pytest.raises(VolumeError):
        rescale(vol, 0.01)


def test_2d_volume_passthrough():
    vol = VoxelVolume(np.random.default_rng(4).random((16, 16, 1)))
    down = downsample(vol, 2)
    assert down.dims == (8, 8, 1)
    up = upsample_to(down, (16, 16, 1))
    assert up.dims == (16, 16, 1)
