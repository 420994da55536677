import numpy as np
import pytest

from crackforge.embed import (PoreGvd, embed_crack, estimate_pore_gvd,
                              partial_volume_smooth)
from crackforge.errors import VolumeError
from crackforge.volume import BinaryMask, VoxelVolume


def phantom_with_dark_sphere(n=32, radius=6.0, matrix=0.6, pore=0.05, seed=0):
    rng = np.random.default_rng(seed)
    data = matrix + 0.02 * rng.standard_normal((n, n, n))
    grids = np.ogrid[:n, :n, :n]
    center = n / 2
    ball = sum((g - center) ** 2 for g in grids) <= radius ** 2
    data[ball] = pore + 0.01 * rng.standard_normal(int(ball.sum()))
    return VoxelVolume(np.clip(data, 0.0, 1.0))


def test_pore_histogram_concentrates_in_dark_phase():
    ct = phantom_with_dark_sphere()
    gvd = estimate_pore_gvd(ct)
    centers = 0.5 * (gvd.bin_edges[:-1] + gvd.bin_edges[1:])
    below = gvd.counts[centers < 0.1].sum()
    assert below / gvd.counts.sum() > 0.99
    assert gvd.n_voxels >= 100


def test_constant_bright_volume_errors():
    ct = VoxelVolume(np.full((16, 16, 16), 0.7))
    with pytest.raises(VolumeError, match="insufficient pore statistics"):
        estimate_pore_gvd(ct)


def test_samples_stay_in_support():
    gvd = estimate_pore_gvd(phantom_with_dark_sphere())
    rng = np.random.default_rng(1)
    draws = gvd.sample(5000, rng)
    assert draws.min() >= gvd.bin_edges[0]
    assert draws.max() <= gvd.bin_edges[-1]


def test_embed_empty_mask_is_bit_identical():
    ct = phantom_with_dark_sphere(seed=2)
    gvd = estimate_pore_gvd(ct)
    empty = BinaryMask(np.zeros(ct.dims, dtype=bool))
    out = embed_crack(ct, empty, gvd, seed=9)
    assert np.array_equal(out.data, ct.data)


def _plane_mask(dims, z, width=1):
    bits = np.zeros(dims, dtype=bool)
    bits[:, :, z:z + width] = True
    return BinaryMask(bits)


def test_interior_crack_values_in_gvd_support():
    ct = phantom_with_dark_sphere(seed=3)
    gvd = estimate_pore_gvd(ct)
    mask = _plane_mask(ct.dims, 10, width=5)
    out = embed_crack(ct, mask, gvd, seed=5)
    interior = np.zeros(ct.dims, dtype=bool)
    interior[:, :, 12] = True  # no background 6-neighbor anywhere
    vals = out.data[interior]
    assert vals.min() >= gvd.bin_edges[0] - 1e-12
    assert vals.max() <= gvd.bin_edges[-1] + 1e-12


def test_crack_mean_matches_gvd_mean():
    ct = phantom_with_dark_sphere(seed=4)
    gvd = estimate_pore_gvd(ct)
    mask = _plane_mask(ct.dims, 8, width=5)
    interior = np.zeros(ct.dims, dtype=bool)
    interior[:, :, 10] = True
    means = []
    for seed in range(10):
        out = embed_crack(ct, mask, gvd, seed=seed)
        means.append(out.data[interior].mean())
    n = int(interior.sum()) * len(means)
    centers = 0.5 * (gvd.bin_edges[:-1] + gvd.bin_edges[1:])
    probs = gvd.counts / gvd.counts.sum()
    sigma = np.sqrt(np.average((centers - gvd.mean()) ** 2, weights=probs))
    assert abs(np.mean(means) - gvd.mean()) <= 3 * sigma / np.sqrt(n) + 1e-3


def test_partial_volume_formula_single_neighbor():
    data = np.array([0.1, 0.9, 0.9]).reshape(3, 1, 1)
    crack = np.array([True, False, False]).reshape(3, 1, 1)
    out = partial_volume_smooth(VoxelVolume(data), BinaryMask(crack), alpha=0.5)
    assert out.data[0, 0, 0] == pytest.approx(0.5 * 0.1 + 0.5 * 0.9)
    assert np.array_equal(out.data[1:], data[1:])


def test_fully_interior_crack_unchanged():
    data = np.random.default_rng(5).random((6, 6, 6))
    crack = BinaryMask(np.ones((6, 6, 6), dtype=bool))
    out = partial_volume_smooth(VoxelVolume(data), crack)
    assert np.array_equal(out.data, data)


def test_edge_voxels_brighter_than_interior():
    for seed in range(20):
        ct = phantom_with_dark_sphere(seed=100 + seed)
        gvd = estimate_pore_gvd(ct)
        mask = _plane_mask(ct.dims, 12, width=3)
        out = embed_crack(ct, mask, gvd, seed=seed)
        edge = np.zeros(ct.dims, dtype=bool)
        edge[:, :, 12] = True
        edge[:, :, 14] = True
        interior = np.zeros(ct.dims, dtype=bool)
        interior[:, :, 13] = True
        assert out.data[edge].mean() > out.data[interior].mean()


def test_embed_deterministic():
    ct = phantom_with_dark_sphere(seed=6)
    gvd = estimate_pore_gvd(ct)
    mask = _plane_mask(ct.dims, 5)
    a = embed_crack(ct, mask, gvd, seed=77)
    b = embed_crack(ct, mask, gvd, seed=77)
    assert np.array_equal(a.data, b.data)


def test_dim_mismatch_rejected():
    ct = phantom_with_dark_sphere()
    gvd = estimate_pore_gvd(ct)
    with pytest.raises(VolumeError):
        embed_crack(ct, BinaryMask(np.zeros((4, 4, 4), dtype=bool)), gvd)


def test_gvd_requires_enough_voxels():
    with pytest.raises(VolumeError):
        PoreGvd(bin_edges=np.linspace(0, 1, 257), counts=np.zeros(256),
                threshold=0.1, n_voxels=50)
