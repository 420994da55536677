"""Impose simulated cracks on crack-free CT volumes.

Crack voxels receive gray values drawn from the empirical distribution of
pore voxels of the background (pores are air filled, like cracks, and show
the same attenuation).  A single smoothing pass then mimics the partial
volume effect: crack voxels touching the background become a weighted mean
of their own value and their background neighbors, so crack edges end up
brighter than the crack interior but darker than the matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask, VoxelVolume

MIN_PORE_VOXELS = 100


@dataclass(frozen=True)
class PoreGvd:
    """Empirical gray-value distribution sampled from pore voxels."""

    bin_edges: np.ndarray      # 257 edges
    counts: np.ndarray         # 256 bins
    threshold: float           # dark-phase threshold actually used
    n_voxels: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if np.any(counts < 0):
            raise VolumeError("histogram counts must be >= 0")
        if self.n_voxels < MIN_PORE_VOXELS:
            raise VolumeError(
                f"insufficient pore statistics: {self.n_voxels} voxels "
                f"(need >= {MIN_PORE_VOXELS})")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "bin_edges",
                           np.asarray(self.bin_edges, dtype=np.float64))

    def mean(self) -> float:
        centers = 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])
        return float(np.average(centers, weights=self.counts))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw i.i.d. gray values: pick a bin, then jitter uniformly in it."""
        probs = self.counts / self.counts.sum()
        bins = rng.choice(len(self.counts), size=n, p=probs)
        left = self.bin_edges[bins]
        right = self.bin_edges[bins + 1]
        return left + rng.random(n) * (right - left)


def _opening_structure(dims) -> np.ndarray:
    """6-neighborhood cross restricted to non-degenerate axes (2D safe)."""
    structure = np.zeros((3, 3, 3), dtype=bool)
    structure[1, 1, 1] = True
    for axis, n in enumerate(dims):
        if n > 1:
            idx = [1, 1, 1]
            for side in (0, 2):
                idx[axis] = side
                structure[tuple(idx)] = True
    return structure


def estimate_pore_gvd(ct: VoxelVolume, pore_quantile: float = 0.02) -> PoreGvd:
    """Histogram the dark phase of a normalized background volume.

    The pore mask is everything strictly below the ``pore_quantile`` gray
    value, opened once to shed isolated noise voxels.
    """
    if not 0.0 < pore_quantile < 1.0:
        raise VolumeError(f"pore_quantile must be in (0, 1), got {pore_quantile}")
    data = ct.data.astype(np.float64, copy=False)
    threshold = float(np.quantile(data, pore_quantile))
    mask = data < threshold
    mask = ndimage.binary_opening(mask, structure=_opening_structure(ct.dims))
    n = int(mask.sum())
    if n < MIN_PORE_VOXELS:
        raise VolumeError(
            f"insufficient pore statistics: {n} voxels below threshold "
            f"{threshold:.4g} after opening (need >= {MIN_PORE_VOXELS})")
    values = data[mask]
    counts, edges = np.histogram(values, bins=256)
    return PoreGvd(bin_edges=edges, counts=counts, threshold=threshold,
                   n_voxels=n)


def partial_volume_smooth(volume: VoxelVolume, crack: BinaryMask,
                          alpha: float = 0.5) -> VoxelVolume:
    """Blend crack voxels that touch the background with their background
    6-neighbors: value <- alpha * own + (1 - alpha) * neighbor mean."""
    if volume.dims != crack.dims:
        raise VolumeError(f"dim mismatch {volume.dims} vs {crack.dims}")
    if not 0.0 <= alpha <= 1.0:
        raise VolumeError(f"alpha must be in [0, 1], got {alpha}")
    data = volume.data.astype(np.float64, copy=True)
    background = ~crack.bits
    nb_sum = np.zeros_like(data)
    nb_cnt = np.zeros_like(data)
    for axis in range(3):
        if volume.dims[axis] == 1:
            continue
        for src, dst in (((slice(1, None),), (slice(None, -1),)),
                         ((slice(None, -1),), (slice(1, None),))):
            s = [slice(None)] * 3
            d = [slice(None)] * 3
            s[axis] = src[0]
            d[axis] = dst[0]
            s, d = tuple(s), tuple(d)
            bg = background[s]
            nb_sum[d] += np.where(bg, data[s], 0.0)
            nb_cnt[d] += bg
    edge = crack.bits & (nb_cnt > 0)
    blended = alpha * data + (1.0 - alpha) * np.divide(
        nb_sum, nb_cnt, out=np.zeros_like(nb_sum), where=nb_cnt > 0)
    out = np.where(edge, blended, data)
    return VoxelVolume(out, volume.spacing_um)


def embed_crack(ct: VoxelVolume, crack: BinaryMask, gvd: PoreGvd,
                seed: int = 0, alpha: float = 0.5) -> VoxelVolume:
    """Fill crack voxels with pore-distribution draws, then smooth edges.

    Identity off the crack mask; deterministic for a given seed.
    """
    if ct.dims != crack.dims:
        raise VolumeError(f"dim mismatch {ct.dims} vs {crack.dims}")
    n = crack.count()
    if n == 0:
        return ct
    rng = np.random.default_rng(seed)
    data = ct.data.astype(np.float64, copy=True)
    data[crack.bits] = gvd.sample(n, rng)
    return partial_volume_smooth(VoxelVolume(data, ct.spacing_um), crack,
                                 alpha=alpha)
