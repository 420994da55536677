import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crackforge.dilation import dilate_fixed_width
from crackforge.errors import VolumeError
from crackforge.patches import (_apply_rigid, _rigid_ops, augment,
                                extract_mask_patches, extract_patches,
                                patch_grid, patch_offsets)
from crackforge.volume import BinaryMask, VoxelVolume


def test_offsets_for_paper_patch_layout():
    # enumerate offsets by the stated rule: stride 50, last shifted inward
    assert patch_offsets(256, 64, 50) == [0, 50, 100, 150, 192]
    assert len(patch_grid((256, 256, 256), 64, 14)) == 125


def test_single_patch_when_size_matches():
    grid = patch_grid((32, 32, 32), 32, 0)
    assert grid == [(0, 0, 0)]


def test_patch_size_validation():
    with pytest.raises(VolumeError):
        patch_grid((16, 16, 16), 32, 4)
    with pytest.raises(VolumeError):
        patch_grid((16, 16, 16), 8, 8)


@settings(deadline=None, max_examples=25)
@given(st.integers(8, 40), st.integers(4, 8), st.integers(0, 3))
def test_patches_cover_every_voxel(dim, size, overlap):
    size = min(size, dim)
    covered = np.zeros((dim, dim, dim), dtype=bool)
    for (ox, oy, oz) in patch_grid((dim, dim, dim), size, overlap):
        covered[ox:ox + size, oy:oy + size, oz:oz + size] = True
        assert 0 <= ox <= dim - size
    assert covered.all()


def test_extract_patches_shapes_and_content():
    rng = np.random.default_rng(0)
    vol = VoxelVolume(rng.random((20, 20, 20)), spacing_um=3.0)
    patches = extract_patches(vol, 8, 2)
    assert all(p.dims == (8, 8, 8) for _, p in patches)
    assert all(p.spacing_um == 3.0 for _, p in patches)
    (ox, oy, oz), first = patches[0]
    assert np.array_equal(first.data, vol.data[ox:ox + 8, oy:oy + 8, oz:oz + 8])


def test_mask_patches_match_volume_grid():
    bits = np.random.default_rng(1).random((20, 20, 20)) < 0.5
    vol_grid = [off for off, _ in extract_patches(
        VoxelVolume(bits.astype(np.float32)), 8, 2)]
    msk_grid = [off for off, _ in extract_mask_patches(BinaryMask(bits), 8, 2)]
    assert vol_grid == msk_grid


def _pair(seed=0, n=12):
    rng = np.random.default_rng(seed)
    img = VoxelVolume(rng.random((n, n, n)))
    msk = BinaryMask(rng.random((n, n, n)) < 0.1)
    return img, msk


def test_augment_identity_element():
    img, msk = _pair()
    out_img, out_msk = augment(img, msk, seed=0, identity=True)
    assert np.array_equal(out_img.data, img.data)
    assert np.array_equal(out_msk.bits, msk.bits)


def test_augment_deterministic():
    img, msk = _pair(2)
    a = augment(img, msk, seed=99)
    b = augment(img, msk, seed=99)
    assert np.array_equal(a[0].data, b[0].data)
    assert np.array_equal(a[1].bits, b[1].bits)


def test_augment_preserves_dims_and_finiteness():
    img, msk = _pair(3)
    for seed in range(10):
        out_img, out_msk = augment(img, msk, seed=seed)
        assert out_img.dims == img.dims
        assert out_msk.dims == msk.dims
        assert np.all(np.isfinite(out_img.data))


def test_flip_is_involution():
    img, _ = _pair(4)
    flipped = _apply_rigid(img.data, [0, 1, 2], [True, False, False])
    again = _apply_rigid(flipped, [0, 1, 2], [True, False, False])
    assert np.array_equal(again, img.data)


def test_rigid_preserves_mask_count():
    _, msk = _pair(5)
    rng = np.random.default_rng(17)
    for _ in range(10):
        perm, flips = _rigid_ops(rng, msk.dims)
        moved = _apply_rigid(msk.bits, perm, flips)
        assert moved.sum() == msk.bits.sum()


def test_rigid_commutes_with_chebyshev_dilation():
    _, msk = _pair(6)
    rng = np.random.default_rng(8)
    for _ in range(5):
        perm, flips = _rigid_ops(rng, msk.dims)
        moved_then_dilated = dilate_fixed_width(
            BinaryMask(_apply_rigid(msk.bits, perm, flips)), 3)
        dilated_then_moved = _apply_rigid(
            dilate_fixed_width(msk, 3).bits, perm, flips)
        assert np.array_equal(moved_then_dilated.bits, dilated_then_moved)
