import numpy as np
import pytest

from crackforge.resample import rescale
from crackforge.riesz import (FEATURE_INDICES, feature_count, multiplier,
                              riesz_feature_adjoint, riesz_feature_stack,
                              riesz_transform)
from crackforge.volume import VoxelVolume


def bandlimited(shape, seed, cutoff=0.12):
    rng = np.random.default_rng(seed)
    spec = np.fft.fftn(rng.standard_normal(shape))
    grids = np.meshgrid(*[np.fft.fftfreq(n) for n in shape], indexing="ij")
    radius = np.sqrt(sum(g * g for g in grids))
    spec[radius > cutoff] = 0.0
    f = np.fft.ifftn(spec).real
    return f / np.abs(f).max()


def test_constant_maps_to_zero():
    const = np.full((32, 32), 3.7)
    assert np.abs(riesz_transform(const, 1)).max() <= 1e-10
    const3 = np.full((16, 16, 16), -1.2)
    assert np.abs(riesz_transform(const3, (1, 2))).max() <= 1e-10


def test_second_order_diagonal_sum_is_negated_centering():
    rng = np.random.default_rng(0)
    for shape in [(64, 64), (32, 32, 32)]:
        f = rng.random(shape)
        d = len(shape)
        acc = sum(riesz_transform(f, (k, k)) for k in range(1, d + 1))
        assert np.abs(acc - (-(f - f.mean()))).max() < 1e-5


def test_sinusoid_allpass():
    n = 64
    x = np.arange(n)
    omega = 2 * np.pi * 5 / n
    f = np.broadcast_to(np.sin(omega * x)[:, None], (n, n)).copy()
    out = riesz_transform(f, 1)
    expected = np.broadcast_to(-np.cos(omega * x)[:, None], (n, n))
    assert np.abs(out - expected).max() < 1e-10


def test_output_zero_mean():
    rng = np.random.default_rng(1)
    f = rng.random((24, 24, 24))
    for idx in FEATURE_INDICES[3]:
        assert abs(riesz_transform(f, idx).mean()) < 1e-12


def test_multiplier_algebra():
    for shape in [(16, 16), (8, 8, 8)]:
        d = len(shape)
        diag = sum(multiplier(shape, (k, k)) for k in range(1, d + 1))
        off_dc = np.ones(shape, dtype=bool)
        off_dc[(0,) * d] = False
        assert np.allclose(diag[off_dc], -1.0)
        assert diag[(0,) * d] == 0.0
        for k in range(1, d + 1):
            m = multiplier(shape, (k,))
            assert np.abs(m).max() <= 1.0 + 1e-12
            # equality on the k axis (away from DC)
            axis_line = [0] * d
            axis_line[k - 1] = slice(1, None)
            assert np.allclose(np.abs(m[tuple(axis_line)]), 1.0)


def test_scale_equivariance_within_two_percent():
    for seed in range(10):
        f = bandlimited((64, 64), seed)
        vol = VoxelVolume(f[:, :, None])
        for k in (1, 2):
            lhs = riesz_transform(rescale(vol, 2.0), k).data
            rhs = rescale(riesz_transform(vol, k), 2.0).data
            sl = tuple(slice(int(0.1 * s), int(0.9 * s)) if s > 1 else slice(None)
                       for s in lhs.shape)
            rel = np.linalg.norm(lhs[sl] - rhs[sl]) / np.linalg.norm(rhs[sl])
            assert rel < 0.02


def test_adjoint_signs():
    # first order: <R f, g> == -<f, R g>; second order: self-adjoint
    rng = np.random.default_rng(7)
    f = rng.random((20, 20))
    g = rng.random((20, 20))
    lhs = np.vdot(riesz_transform(f, 1), g)
    rhs = np.vdot(f, riesz_transform(g, 1))
    assert lhs == pytest.approx(-rhs, rel=1e-10)
    lhs2 = np.vdot(riesz_transform(f, (1, 2)), g)
    rhs2 = np.vdot(f, riesz_transform(g, (1, 2)))
    assert lhs2 == pytest.approx(rhs2, rel=1e-10)


def test_feature_stack_matches_individual_transforms():
    rng = np.random.default_rng(3)
    f = rng.random((16, 16, 16))
    feats = riesz_feature_stack(f)
    assert feats.shape == (feature_count(3),) + f.shape
    for m, idx in enumerate(FEATURE_INDICES[3]):
        assert np.allclose(feats[m], riesz_transform(f, idx))


def test_feature_adjoint_is_true_adjoint():
    rng = np.random.default_rng(4)
    f = rng.random((12, 12))
    cot = rng.random((feature_count(2), 12, 12))
    feats = riesz_feature_stack(f)
    lhs = float(np.vdot(feats, cot))
    rhs = float(np.vdot(f, riesz_feature_adjoint(cot)))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_voxel_volume_2d_pathway():
    rng = np.random.default_rng(5)
    vol = VoxelVolume(rng.random((24, 24, 1)))
    out = riesz_transform(vol, 2)
    assert isinstance(out, VoxelVolume)
    assert out.dims == vol.dims
    flat = riesz_transform(vol.data[:, :, 0], 2)
    assert np.allclose(out.data[:, :, 0], flat)


def test_composition_gives_second_order():
    # the identity R_1 R_2 == R_(1,2) is exact off the Nyquist bins, so test
    # it on a band-limited image
    f = bandlimited((32, 32), seed=6, cutoff=0.2)
    once = riesz_transform(riesz_transform(f, 1), 2)
    joint = riesz_transform(f, (1, 2))
    assert np.allclose(once, joint, atol=1e-10)
