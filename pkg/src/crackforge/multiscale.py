"""Model-agnostic multiscale segmentation with voxelwise-maximum fusion.

Any per-volume segmenter (a callable producing a probability map volume) is
run on every level of a resolution pyramid; each level's map is thresholded
with the shared threshold, upsampled back to the original dims (nearest
neighbor, masks stay binary), and the binary results are fused by voxelwise
OR.  A voxel is a crack voxel as soon as any level says so.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import VolumeError
from .resample import build_pyramid, upsample_mask_to
from .volume import BinaryMask, VoxelVolume

Segmenter = Callable[[VoxelVolume], VoxelVolume]


@dataclass(frozen=True)
class FusionConfig:
    levels: int = 3
    factor: int = 2
    threshold: float = 0.5

    def __post_init__(self):
        if self.levels < 1:
            raise VolumeError(f"levels must be >= 1, got {self.levels}")
        if not 0.0 < self.threshold < 1.0:
            raise VolumeError(f"threshold must be in (0, 1), got {self.threshold}")


def segment_multiscale(segmenter: Segmenter, volume: VoxelVolume,
                       cfg: FusionConfig = FusionConfig()) -> BinaryMask:
    """Fuse per-level thresholded masks by voxelwise OR."""
    pyramid = build_pyramid(volume, levels=cfg.levels, factor=cfg.factor)
    fused = np.zeros(volume.dims, dtype=bool)
    for level in pyramid.levels:
        prob = segmenter(level)
        if prob.dims != level.dims:
            raise VolumeError(
                f"segmenter changed dims {level.dims} -> {prob.dims}")
        mask = BinaryMask(prob.data >= cfg.threshold)
        fused |= upsample_mask_to(mask, volume.dims).bits
    return BinaryMask(fused)
