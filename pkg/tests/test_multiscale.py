import numpy as np
import pytest

from crackforge.errors import VolumeError
from crackforge.multiscale import FusionConfig, segment_multiscale
from crackforge.resample import build_pyramid, upsample_mask_to
from crackforge.volume import BinaryMask, VoxelVolume


def blob_segmenter(volume: VoxelVolume) -> VoxelVolume:
    """Deterministic fake model: probability = gray value."""
    return VoxelVolume(np.clip(volume.data, 0.0, 1.0), volume.spacing_um)


def _volume(seed=0, n=24):
    rng = np.random.default_rng(seed)
    return VoxelVolume(rng.random((n, n, n)))


def test_single_level_equals_plain_thresholding():
    vol = _volume(1)
    cfg = FusionConfig(levels=1, threshold=0.5)
    fused = segment_multiscale(blob_segmenter, vol, cfg)
    plain = blob_segmenter(vol).data >= 0.5
    assert np.array_equal(fused.bits, plain)


def test_fused_contains_level_zero_mask():
    vol = _volume(2)
    cfg = FusionConfig(levels=3, threshold=0.5)
    fused = segment_multiscale(blob_segmenter, vol, cfg)
    level0 = blob_segmenter(vol).data >= 0.5
    assert np.all(fused.bits[level0])


def test_zero_segmenter_gives_empty_mask():
    zero = lambda v: VoxelVolume(np.zeros(v.dims), v.spacing_um)
    for levels in (1, 2, 3):
        fused = segment_multiscale(_volume(3), None) if False else \
            segment_multiscale(zero, _volume(3), FusionConfig(levels=levels))
        assert fused.count() == 0


def test_exactness_against_manual_fusion():
    vol = _volume(4)
    cfg = FusionConfig(levels=3, factor=2, threshold=0.5)
    fused = segment_multiscale(blob_segmenter, vol, cfg)
    pyramid = build_pyramid(vol, levels=3, factor=2)
    manual = np.zeros(vol.dims, dtype=bool)
    for level in pyramid.levels:
        mask = BinaryMask(blob_segmenter(level).data >= 0.5)
        manual |= upsample_mask_to(mask, vol.dims).bits
    assert np.array_equal(fused.bits, manual)


def test_duplicate_levels_idempotent():
    vol = _volume(5)
    level_mask = blob_segmenter(vol).data >= 0.5
    once = level_mask.copy()
    twice = level_mask | level_mask
    assert np.array_equal(once, twice)


def test_fusion_config_validation():
    with pytest.raises(VolumeError):
        FusionConfig(levels=0)
    with pytest.raises(VolumeError):
        FusionConfig(threshold=0.0)


def test_segmenter_errors_propagate():
    def broken(volume):
        raise RuntimeError("segmenter exploded")

    with pytest.raises(RuntimeError, match="exploded"):
        segment_multiscale(broken, _volume(6), FusionConfig(levels=2))
