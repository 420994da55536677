"""Crack thickening: adaptive per-slice dilation and fixed-width dilation.

Adaptive mode widens slice i of the mask N_i times with a 2x2 square
structuring element anchored at its top-left pixel, where the N_i follow a
Bernoulli random walk: N_0 = 0 and each step increments by 1 with
probability p.  Marginally N_i is Binomial(i, p), so crack thickness drifts
upward along the x axis.  Fixed-width mode dilates uniformly with the 3x3x3
box, giving odd Chebyshev widths 1, 3, 5, ...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import VolumeError
from .volume import BinaryMask


@dataclass(frozen=True)
class DilationProfile:
    """Per-slice dilation counts drawn from a Bernoulli random walk."""

    p: float
    counts: np.ndarray
    seed: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts[0] != 0:
            raise VolumeError("dilation profile must start at 0")
        steps = np.diff(counts)
        if steps.size and (np.min(steps) < 0 or np.max(steps) > 1):
            raise VolumeError("dilation profile increments must be 0 or 1")
        object.__setattr__(self, "counts", counts)


def sample_dilation_profile(n_slices: int, p: float, seed: int) -> DilationProfile:
    if not 0.0 < p < 1.0:
        raise VolumeError(f"need 0 < p < 1, got {p}")
    rng = np.random.default_rng(seed)
    steps = (rng.random(max(0, n_slices - 1)) < p).astype(np.int64)
    counts = np.concatenate([[0], np.cumsum(steps)])
    return DilationProfile(p=p, counts=counts, seed=seed)


def _dilate_slice_2x2(plane: np.ndarray, times: int) -> np.ndarray:
    """Dilate a (ny, nz) slice with the top-left-anchored 2x2 square.

    One pass adds the +y, +z and +y+z shifts, so an isolated pixel grows by
    ``times`` pixels toward +y and +z.
    """
    out = plane
    for _ in range(times):
        grown = out.copy()
        grown[1:, :] |= out[:-1, :]
        grown[:, 1:] |= out[:, :-1]
        grown[1:, 1:] |= out[:-1, :-1]
        out = grown
    return out


def adaptive_dilate(mask: BinaryMask, p: float,
                    seed: int) -> tuple[BinaryMask, DilationProfile]:
    """Widen the crack with slice-dependent dilation counts.

    Returns the widened mask together with the realized profile.  The output
    always contains the input.
    """
    profile = sample_dilation_profile(mask.dims[0], p, seed)
    bits = mask.bits.copy()
    for i, times in enumerate(profile.counts):
        if times > 0 and bits[i].any():
            bits[i] = _dilate_slice_2x2(bits[i], int(times))
    return BinaryMask(bits), profile


def dilate_fixed_width(mask: BinaryMask, width: int) -> BinaryMask:
    """Thicken a one-voxel surface to an odd Chebyshev width (1, 3, 5, ...)."""
    width = int(width)
    if width < 1 or width % 2 == 0:
        raise VolumeError(f"width must be odd and >= 1, got {width}")
    k = (width - 1) // 2
    if k == 0:
        return mask
    structure = np.ones((3, 3, 3), dtype=bool)
    bits = ndimage.binary_dilation(mask.bits, structure=structure, iterations=k)
    return BinaryMask(bits)
