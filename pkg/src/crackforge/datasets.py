"""Synthetic background phantoms and semi-synthetic training pairs.

Real crack-free CT backgrounds are interchangeable with the phantoms built
here: a smooth bright matrix texture plus dark spherical pores, normalized
to [0, 1].  Crack masks come from rough height profiles/fields thickened to
a fixed width; embedding fills them from the phantom's own pore gray-value
distribution.  These builders feed the training loop and the end-to-end
tests; production use replaces the phantom with a real scan.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .dilation import dilate_fixed_width
from .embed import PoreGvd, embed_crack, estimate_pore_gvd
from .errors import VolumeError
from .fbm import FbmParams, gen_fbm_height_field, gen_fbm_profile, \
    rasterize_height_field, rasterize_height_profile
from .volume import BinaryMask, VoxelVolume


def make_background_phantom(dims: tuple[int, int, int], seed: int = 0,
                            matrix_level: float = 0.6,
                            texture_strength: float = 0.08,
                            pore_fraction: float = 0.01,
                            pore_value: float = 0.05) -> VoxelVolume:
    """Crack-free CT stand-in: textured bright matrix with dark pores."""
    rng = np.random.default_rng(seed)
    nx, ny, nz = dims
    noise = rng.standard_normal(dims)
    sigma = [2.0 if n > 1 else 0.0 for n in dims]
    texture = ndimage.gaussian_filter(noise, sigma=sigma, mode="mirror")
    sd = texture.std()
    if sd > 0:
        texture *= texture_strength / sd
    data = matrix_level + texture + 0.01 * rng.standard_normal(dims)

    target_pore = pore_fraction * data.size
    pore_voxels = 0.0
    guard = 0
    while pore_voxels < target_pore and guard < 10_000:
        guard += 1
        r = rng.uniform(2.0, max(3.0, min(nx, ny) / 12))
        center = [rng.uniform(r, n - r) if n > 1 else 0.0 for n in dims]
        grids = np.ogrid[tuple(slice(0, n) for n in dims)]
        dist2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        ball = dist2 <= r * r
        data[ball] = pore_value + 0.01 * rng.standard_normal(int(ball.sum()))
        pore_voxels += ball.sum()
    return VoxelVolume(np.clip(data, 0.0, 1.0), spacing_um=1.0)


def make_crack_mask(dims: tuple[int, int, int], width: int, hurst: float = 0.8,
                    amplitude: float | None = None, seed: int = 0) -> BinaryMask:
    """Rough crack of fixed odd width; a curve for 2D dims, else a surface."""
    nx, ny, nz = dims
    if amplitude is None:
        amplitude = 0.15 * (ny if nz == 1 else nz)
    if nz == 1:
        params = FbmParams(hurst=hurst, grid_n=nx, amplitude=amplitude, seed=seed)
        height = gen_fbm_profile(params) + ny / 2.0
        mask, _ = rasterize_height_profile(height, dims)
    else:
        if nx != ny:
            raise VolumeError(f"3D crack masks need nx == ny, got {dims}")
        params = FbmParams(hurst=hurst, grid_n=nx, amplitude=amplitude, seed=seed)
        height = gen_fbm_height_field(params) + nz / 2.0
        mask, _ = rasterize_height_field(height, dims)
    return dilate_fixed_width(mask, width)


def _phantom_dims_for(dims: tuple[int, int, int]) -> tuple[int, int, int]:
    """Background large enough for robust pore statistics and patch cutting."""
    nx, ny, nz = dims
    if nz == 1:
        side = max(192, 2 * max(nx, ny))
        return (side, side, 1)
    side = max(64, nx, ny, nz)
    return (side, side, side)


def make_semisynthetic_pair(dims: tuple[int, int, int], width: int,
                            seed: int = 0, hurst: float = 0.8,
                            gvd: PoreGvd | None = None,
                            background: VoxelVolume | None = None
                            ) -> tuple[VoxelVolume, BinaryMask]:
    """One (image, ground truth) pair: phantom background + embedded crack.

    Without an explicit background, a phantom larger than ``dims`` is built
    and a random window of it is used, so pore statistics stay reliable even
    for small patch sizes.
    """
    rng = np.random.default_rng(seed)
    if background is None:
        background = make_background_phantom(_phantom_dims_for(dims), seed=seed)
    if gvd is None:
        gvd = estimate_pore_gvd(background)
    corner = [int(rng.integers(0, b - d + 1)) if b > d else 0
              for b, d in zip(background.dims, dims)]
    window = tuple(slice(c, c + d) for c, d in zip(corner, dims))
    patch = VoxelVolume(background.data[window].copy(), background.spacing_um)
    mask = make_crack_mask(dims, width, hurst=hurst,
                           seed=int(rng.integers(2**31)))
    image = embed_crack(patch, mask, gvd, seed=int(rng.integers(2**31)))
    return image, mask


def make_training_set(n_pairs: int, dims: tuple[int, int, int], width: int,
                      seed: int = 0, n_backgrounds: int = 6
                      ) -> list[tuple[VoxelVolume, BinaryMask]]:
    """Semi-synthetic pairs cut from a pool of varied phantom backgrounds.

    Matrix brightness, texture strength and pore density vary between the
    backgrounds so a trained model cannot overfit one background look.
    """
    rng = np.random.default_rng(seed)
    pool = []
    for k in range(min(n_backgrounds, n_pairs)):
        bg = make_background_phantom(
            _phantom_dims_for(dims), seed=seed + 1000 * k + 1,
            matrix_level=rng.uniform(0.5, 0.7),
            texture_strength=rng.uniform(0.05, 0.12),
            pore_fraction=rng.uniform(0.01, 0.03))
        pool.append((bg, estimate_pore_gvd(bg)))
    seeds = np.random.SeedSequence(seed).spawn(n_pairs)
    out = []
    for i, ss in enumerate(seeds):
        pair_seed = int(ss.generate_state(1)[0] % (2**31))
        background, gvd = pool[i % len(pool)]
        out.append(make_semisynthetic_pair(dims, width, seed=pair_seed,
                                           gvd=gvd, background=background))
    return out
