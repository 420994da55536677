"""Overlapping patch extraction and training-time augmentation."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask, VoxelVolume


def patch_offsets(length: int, size: int, stride: int) -> list[int]:
    """Stride offsets along one axis, with the last patch shifted inward so
    it ends exactly at the boundary."""
    offs = list(range(0, length - size + 1, stride))
    if offs[-1] != length - size:
        offs.append(length - size)
    return offs


def patch_grid(dims, size: int, overlap: int) -> list[tuple[int, int, int]]:
    """All patch corner offsets for a volume of ``dims``.

    Patches tile with stride ``size - overlap``; every voxel is covered.
    Axes of length 1 (2D images) get the single offset 0.
    """
    size = int(size)
    overlap = int(overlap)
    if not 0 <= overlap < size:
        raise VolumeError(f"need 0 <= overlap < size, got {overlap}, {size}")
    if size > min(n for n in dims if n > 1):
        raise VolumeError(f"patch size {size} exceeds dims {dims}")
    stride = size - overlap
    per_axis = [patch_offsets(n, size, stride) if n > 1 else [0] for n in dims]
    return [(ox, oy, oz) for ox in per_axis[0] for oy in per_axis[1]
            for oz in per_axis[2]]


def _patch_slices(offset, size, dims):
    return tuple(slice(o, o + (size if n > 1 else 1))
                 for o, n in zip(offset, dims))


def extract_patches(volume: VoxelVolume, size: int,
                    overlap: int) -> list[tuple[tuple[int, int, int], VoxelVolume]]:
    """Cut the volume into overlapping cubes of ``size`` voxels per axis."""
    out = []
    for offset in patch_grid(volume.dims, size, overlap):
        sl = _patch_slices(offset, size, volume.dims)
        out.append((offset, VoxelVolume(volume.data[sl].copy(), volume.spacing_um)))
    return out


def extract_mask_patches(mask: BinaryMask, size: int,
                         overlap: int) -> list[tuple[tuple[int, int, int], BinaryMask]]:
    out = []
    for offset in patch_grid(mask.dims, size, overlap):
        sl = _patch_slices(offset, size, mask.dims)
        out.append((offset, BinaryMask(mask.bits[sl].copy())))
    return out


def _rigid_ops(rng: np.random.Generator, dims):
    """Pick a random axis permutation (within equal-length axis groups) and
    per-axis flips.  Equal-length grouping keeps dims unchanged."""
    perm = list(range(3))
    groups: dict[int, list[int]] = {}
    for k, n in enumerate(dims):
        groups.setdefault(n, []).append(k)
    for axes in groups.values():
        if len(axes) > 1:
            shuffled = list(rng.permutation(axes))
            for src, dst in zip(axes, shuffled):
                perm[src] = dst
    flips = [bool(rng.integers(2)) and dims[k] > 1 for k in range(3)]
    return perm, flips


def _apply_rigid(arr: np.ndarray, perm, flips) -> np.ndarray:
    out = np.transpose(arr, perm)
    axes = tuple(k for k, f in enumerate(flips) if f)
    if axes:
        out = np.flip(out, axis=axes)
    return np.ascontiguousarray(out)


def _crop_zoom(img: np.ndarray, msk: np.ndarray, rng: np.random.Generator):
    dims = img.shape
    frac = rng.uniform(0.7, 0.95)
    crop = [max(2, int(round(n * frac))) if n > 1 else 1 for n in dims]
    corner = [int(rng.integers(0, n - c + 1)) for n, c in zip(dims, crop)]
    sl = tuple(slice(o, o + c) for o, c in zip(corner, crop))
    sub_img, sub_msk = img[sl], msk[sl]
    zoom = [n / c for n, c in zip(dims, crop)]
    img_out = ndimage.zoom(sub_img, zoom, order=1, mode="mirror", grid_mode=False)
    msk_out = ndimage.zoom(sub_msk.astype(np.uint8), zoom, order=0,
                           mode="mirror", grid_mode=False).astype(bool)
    img_out = _fit_to(img_out, dims)
    msk_out = _fit_to(msk_out, dims)
    return img_out, msk_out


def _fit_to(arr: np.ndarray, dims) -> np.ndarray:
    """Pad (edge) or crop so rounding in ndimage.zoom cannot change dims."""
    pads, slices = [], []
    for n, target in zip(arr.shape, dims):
        pads.append((0, max(0, target - n)))
        slices.append(slice(0, target))
    if any(p[1] for p in pads):
        arr = np.pad(arr, pads, mode="edge")
    return arr[tuple(slices)]


def augment(patch: VoxelVolume, mask: BinaryMask, seed: int,
            identity: bool = False) -> tuple[VoxelVolume, BinaryMask]:
    """One random augmentation of an (image, mask) pair.

    Composition of optional steps: rigid motion (both), crop-and-zoom (both),
    blur or unsharp masking (image only), gamma/offset gray distortion
    (image only).  Deterministic for a given seed; ``identity=True`` skips
    everything and returns the inputs unchanged.
    """
    if patch.dims != mask.dims:
        raise VolumeError(f"patch dims {patch.dims} != mask dims {mask.dims}")
    if identity:
        return patch, mask
    rng = np.random.default_rng(seed)
    img = patch.data.astype(np.float64, copy=True)
    msk = mask.bits.copy()

    if rng.random() < 0.9:
        perm, flips = _rigid_ops(rng, patch.dims)
        img = _apply_rigid(img, perm, flips)
        msk = _apply_rigid(msk, perm, flips)

    if rng.random() < 0.5:
        img, msk = _crop_zoom(img, msk, rng)

    roll = rng.random()
    sigma = rng.uniform(0.5, 1.2)
    if roll < 0.35:
        img = ndimage.gaussian_filter(img, sigma, mode="mirror")
    elif roll < 0.7:
        blurred = ndimage.gaussian_filter(img, sigma, mode="mirror")
        img = img + rng.uniform(0.5, 1.5) * (img - blurred)

    if rng.random() < 0.5:
        gamma = rng.uniform(0.7, 1.4)
        offset = rng.uniform(-0.05, 0.05)
        img = np.clip(img, 0.0, 1.0) ** gamma + offset
    if rng.random() < 0.5:
        contrast = rng.uniform(0.6, 1.4)
        img = img.mean() + contrast * (img - img.mean())
    img = np.clip(img, 0.0, 1.0)
    return VoxelVolume(img, patch.spacing_um), BinaryMask(msk)
