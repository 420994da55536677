"""Fractional Brownian crack surfaces: spectral synthesis and rasterization.

Height fields are synthesized in the frequency domain: white Gaussian noise
shaped by the isotropic amplitude spectrum |freq|^-(hurst + E/2), where E is
the field dimension (2 for surfaces, 1 for profiles).  Synthesis runs on a
doubled grid and crops the center, which suppresses the periodicity bias of
plain FFT synthesis.  Only the Hurst scaling law of increments is
contractual: the mean squared height difference grows like lag^(2 hurst).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VolumeError
from .volume import BinaryMask


@dataclass(frozen=True)
class FbmParams:
    """Roughness (hurst), lateral resolution, vertical scale, and seed."""

    hurst: float
    grid_n: int
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.hurst <= 1.0:
            raise VolumeError(f"hurst must be in (0, 1], got {self.hurst}")
        if self.grid_n < 2:
            raise VolumeError(f"grid_n must be >= 2, got {self.grid_n}")
        if self.amplitude < 0:
            raise VolumeError(f"amplitude must be >= 0, got {self.amplitude}")


def _spectral_field(shape: tuple[int, ...], hurst: float,
                    rng: np.random.Generator) -> np.ndarray:
    """Zero-mean unit-variance field with fBm increment scaling."""
    noise = rng.standard_normal(shape)
    spectrum = np.fft.fftn(noise)
    grids = np.meshgrid(*[np.fft.fftfreq(n) for n in shape], indexing="ij")
    radius = np.sqrt(sum(g * g for g in grids))
    radius[(0,) * len(shape)] = np.inf  # kill DC
    spectrum *= radius ** (-(hurst + len(shape) / 2.0))
    field = np.fft.ifftn(spectrum).real
    field -= field.mean()
    sd = field.std()
    if sd > 0:
        field /= sd
    return field


def gen_fbm_height_field(params: FbmParams) -> np.ndarray:
    """Sample a grid_n x grid_n rough height field h(x, y) in voxels."""
    rng = np.random.default_rng(params.seed)
    n = params.grid_n
    big = _spectral_field((2 * n, 2 * n), params.hurst, rng)
    field = big[n // 2:n // 2 + n, n // 2:n // 2 + n].copy()
    field -= field.mean()
    return params.amplitude * field


def gen_fbm_profile(params: FbmParams) -> np.ndarray:
    """1D variant: a rough height profile h(x) for cracks in 2D images."""
    rng = np.random.default_rng(params.seed)
    n = params.grid_n
    big = _spectral_field((2 * n,), params.hurst, rng)
    prof = big[n // 2:n // 2 + n].copy()
    prof -= prof.mean()
    return params.amplitude * prof


def _column_spans(height: np.ndarray, n_levels: int):
    """Per-column voxel index spans that leave no gaps between neighbors.

    Each column covers the integer levels between the midpoints toward its
    lateral neighbors (plus the rounded height itself), so adjacent columns
    always meet or overlap along the surface normal.
    """
    mids_min = height.copy()
    mids_max = height.copy()
    for axis in range(height.ndim):
        for shift in (1, -1):
            nb = np.roll(height, shift, axis=axis)
            # roll wraps; re-use own height at the open ends
            edge = [slice(None)] * height.ndim
            edge[axis] = slice(0, 1) if shift == 1 else slice(-1, None)
            nb[tuple(edge)] = height[tuple(edge)]
            mid = 0.5 * (height + nb)
            np.minimum(mids_min, mid, out=mids_min)
            np.maximum(mids_max, mid, out=mids_max)
    rounded = np.rint(height)
    lo = np.minimum(rounded, np.ceil(mids_min)).astype(np.int64)
    hi = np.maximum(rounded, np.floor(mids_max)).astype(np.int64)
    clipped = bool((lo < 0).any() or (hi > n_levels - 1).any())
    np.clip(lo, 0, n_levels - 1, out=lo)
    np.clip(hi, 0, n_levels - 1, out=hi)
    return lo, hi, clipped


def rasterize_height_field(height: np.ndarray,
                           dims: tuple[int, int, int]) -> tuple[BinaryMask, bool]:
    """Voxelize a height field into a one-voxel-thin, gap-free surface.

    ``height`` gives the absolute z position (in voxels) per lateral (x, y)
    column and must match the lateral dims.  Heights outside the z range are
    clipped; the returned flag reports whether clipping occurred.
    """
    height = np.asarray(height, dtype=np.float64)
    nx, ny, nz = dims
    if height.shape != (nx, ny):
        raise VolumeError(f"height field {height.shape} does not match "
                          f"lateral dims {(nx, ny)}")
    if not np.all(np.isfinite(height)):
        raise VolumeError("height field contains NaN or Inf")
    lo, hi, clipped = _column_spans(height, nz)
    levels = np.arange(nz)
    bits = (levels[None, None, :] >= lo[:, :, None]) & \
           (levels[None, None, :] <= hi[:, :, None])
    return BinaryMask(bits), clipped


def rasterize_height_profile(height: np.ndarray,
                             dims: tuple[int, int, int]) -> tuple[BinaryMask, bool]:
    """2D variant: voxelize h(x) into a gap-free curve in an (nx, ny, 1) image."""
    height = np.asarray(height, dtype=np.float64)
    nx, ny, nz = dims
    if nz != 1:
        raise VolumeError(f"profile rasterization needs nz == 1, got {nz}")
    if height.shape != (nx,):
        raise VolumeError(f"profile {height.shape} does not match nx {nx}")
    if not np.all(np.isfinite(height)):
        raise VolumeError("height profile contains NaN or Inf")
    lo, hi, clipped = _column_spans(height, ny)
    levels = np.arange(ny)
    bits = (levels[None, :] >= lo[:, None]) & (levels[None, :] <= hi[:, None])
    return BinaryMask(bits[:, :, None]), clipped


def combine_cracks(masks: list[BinaryMask]) -> BinaryMask:
    """Voxelwise union; combining realizations yields crossing cracks."""
    if not masks:
        raise VolumeError("no masks to combine")
    dims = masks[0].dims
    out = np.zeros(dims, dtype=bool)
    for m in masks:
        if m.dims != dims:
            raise VolumeError(f"dim mismatch {m.dims} vs {dims}")
        out |= m.bits
    return BinaryMask(out)
