"""Pyramid resampling: spline downsampling, upsampling, and grid rescaling.

Spline evaluation mirror-reflects at the volume edges, which keeps constants
exact and avoids dark-frame artifacts at borders.  Single-voxel axes (the z
axis of 2D images) pass through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask, VoxelVolume


def _grid_eval(data: np.ndarray, coords_1d: list[np.ndarray], order: int) -> np.ndarray:
    """Evaluate a separable sample grid with a spline of the given order.

    ``coords_1d[k]`` holds the fractional source coordinates along axis k.
    Axes of length 1 must be sampled at coordinate 0 only.
    """
    out_shape = tuple(len(c) for c in coords_1d)
    keep = [k for k, n in enumerate(data.shape) if n > 1]
    squeezed = data.squeeze()
    if squeezed.ndim == 0:
        return np.full(out_shape, float(data.ravel()[0]))
    mesh = np.meshgrid(*[coords_1d[k] for k in keep], indexing="ij")
    vals = ndimage.map_coordinates(
        squeezed.astype(np.float64, copy=False), np.stack(mesh),
        order=order, mode="mirror")
    mid = tuple(len(coords_1d[k]) if k in keep else 1 for k in range(len(out_shape)))
    return np.ascontiguousarray(np.broadcast_to(vals.reshape(mid), out_shape))


def downsample(volume: VoxelVolume, factor: int) -> VoxelVolume:
    """Shrink dims by ``factor`` (output dims = ceil(dims/factor)).

    Values are cubic-spline interpolations of the input at the coarse sample
    positions ``k * factor``; the voxel edge length grows by ``factor``.
    """
    factor = int(factor)
    if factor < 2:
        raise VolumeError(f"downsample factor must be >= 2, got {factor}")
    out_dims = tuple(ceil(n / factor) for n in volume.dims)
    if min(out_dims) < 1:
        raise VolumeError(f"downsample by {factor} empties dims {volume.dims}")
    coords = [np.arange(m, dtype=np.float64) * factor if n > 1 else np.zeros(m)
              for m, n in zip(out_dims, volume.dims)]
    vals = _grid_eval(volume.data, coords, order=3)
    return VoxelVolume(vals, spacing_um=volume.spacing_um * factor)


def _target_coords(dims_in, dims_out) -> list[np.ndarray]:
    coords = []
    for n_in, n_out in zip(dims_in, dims_out):
        if n_out == 1:
            coords.append(np.zeros(1))
        else:
            coords.append(np.arange(n_out) * (n_in - 1) / (n_out - 1))
    return coords


def upsample_to(volume: VoxelVolume, dims: tuple[int, int, int]) -> VoxelVolume:
    """Trilinear upsampling to ``dims`` (corner-aligned).  Identity when dims match."""
    dims = tuple(int(n) for n in dims)
    if any(m < n for m, n in zip(dims, volume.dims)):
        raise VolumeError(f"target dims {dims} smaller than {volume.dims}")
    if dims == volume.dims:
        return volume
    vals = _grid_eval(volume.data, _target_coords(volume.dims, dims), order=1)
    scale = volume.dims[0] / dims[0] if dims[0] > 1 else 1.0
    return VoxelVolume(vals, spacing_um=volume.spacing_um * scale)


def upsample_mask_to(mask: BinaryMask, dims: tuple[int, int, int]) -> BinaryMask:
    """Nearest-neighbor mask upsampling with the same corner-aligned grid."""
    dims = tuple(int(n) for n in dims)
    if any(m < n for m, n in zip(dims, mask.dims)):
        raise VolumeError(f"target dims {dims} smaller than {mask.dims}")
    if dims == mask.dims:
        return mask
    coords = _target_coords(mask.dims, dims)
    idx = np.ix_(*[np.rint(c).astype(int) for c in coords])
    return BinaryMask(mask.bits[idx])


@dataclass(frozen=True)
class Pyramid:
    """Resolution pyramid; level 0 is the original volume."""

    levels: list[VoxelVolume] = field(default_factory=list)
    factor: int = 2

    def __len__(self) -> int:
        return len(self.levels)


def build_pyramid(volume: VoxelVolume, levels: int = 3, factor: int = 2) -> Pyramid:
    if levels < 1:
        raise VolumeError(f"pyramid needs >= 1 level, got {levels}")
    out = [volume]
    for _ in range(levels - 1):
        out.append(downsample(out[-1], factor))
    return Pyramid(levels=out, factor=factor)


def rescale(volume: VoxelVolume, a: float) -> VoxelVolume:
    """Spatial dilation f(x) -> f(x/a): dims scale by ``a`` (rounded).

    Cubic-spline resampling on the stretched grid; ``a = 1`` is the identity.
    """
    if not a > 0:
        raise VolumeError(f"scale factor must be > 0, got {a}")
    out_dims = tuple(int(round(n * a)) if n > 1 else 1 for n in volume.dims)
    if min(out_dims) < 1:
        raise VolumeError(f"rescale by {a} empties dims {volume.dims}")
    coords = [np.arange(m, dtype=np.float64) / a if n > 1 else np.zeros(m)
              for m, n in zip(out_dims, volume.dims)]
    vals = _grid_eval(volume.data, coords, order=3)
    return VoxelVolume(vals, spacing_um=volume.spacing_um / a)
