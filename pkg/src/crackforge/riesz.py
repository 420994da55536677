"""Discrete first- and second-order Riesz transforms.

The transforms are realized as frequency multipliers: the first-order
transform along axis k multiplies the spectrum by -i xi_k / |xi| and the
second-order transform for the pair (k, l) by -xi_k xi_l / |xi|^2, with the
zero-frequency multiplier set to 0.  Both are all-pass (|multiplier| <= 1,
with equality on-axis), kill constants, return zero-mean output, and commute
with spatial rescaling up to discretization error.

The multipliers are 0-homogeneous in the frequency vector, which is what
makes the transforms scale-equivariant.  Second-order multipliers compose
from first-order ones, and since they are real and even the second-order
transforms are self-adjoint while first-order ones are anti-self-adjoint;
backpropagation through a transform is therefore just the conjugate
multiplier.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import VolumeError
from .volume import VoxelVolume

# feature order used by Riesz layers and the model file, per dimension:
# first order R_1..R_d, then second order R_(k,l) for k <= l
FEATURE_INDICES = {
    2: ((1,), (2,), (1, 1), (1, 2), (2, 2)),
    3: ((1,), (2,), (3,), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)),
}


def feature_count(d: int) -> int:
    """d first-order plus d(d+1)/2 second-order transforms."""
    return d + d * (d + 1) // 2


@lru_cache(maxsize=32)
def _frequency_grids(shape: tuple[int, ...]) -> tuple[np.ndarray, ...]:
    grids = np.meshgrid(*[np.fft.fftfreq(n) for n in shape], indexing="ij")
    return tuple(g for g in grids)


@lru_cache(maxsize=64)
def multiplier(shape: tuple[int, ...], index: tuple[int, ...],
               dtype: str = "complex128") -> np.ndarray:
    """Frequency multiplier for one transform on a grid of ``shape``."""
    d = len(shape)
    if any(not 1 <= k <= d for k in index) or len(index) not in (1, 2):
        raise VolumeError(f"bad transform index {index} for d={d}")
    grids = _frequency_grids(shape)
    mag2 = sum(g * g for g in grids)
    center = (0,) * d
    mag2[center] = 1.0  # avoid 0/0; multiplier is zeroed there below
    if len(index) == 1:
        out = -1j * grids[index[0] - 1] / np.sqrt(mag2)
    else:
        k, l = index
        out = -grids[k - 1] * grids[l - 1] / mag2 + 0j
    out[center] = 0.0
    mag2[center] = 0.0
    return out.astype(dtype, copy=False)


def _normalize_index(index) -> tuple[int, ...]:
    if isinstance(index, int):
        return (index,)
    idx = tuple(int(k) for k in index)
    if len(idx) == 2:
        return (min(idx), max(idx))
    return idx


def apply_multiplier(data: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Real part of IFFT(mult * FFT(data)); linear on real arrays."""
    return _fft.ifftn(mult * _fft.fftn(data)).real


def riesz_transform(volume, index):
    """First-order (k) or second-order (k, l) Riesz transform, 1-based axes.

    Accepts a VoxelVolume (the z axis is dropped for 2D images) or a bare
    array.  Output is zero-mean and has the same shape as the input.
    """
    if isinstance(volume, VoxelVolume):
        arr = volume.data
        if volume.ndim_spatial == 2:
            out = riesz_transform(arr[:, :, 0], index)
            return VoxelVolume(out[:, :, None], volume.spacing_um)
        out = riesz_transform(arr, index)
        return VoxelVolume(out, volume.spacing_um)
    arr = np.asarray(volume, dtype=np.float64)
    idx = _normalize_index(index)
    mult = multiplier(arr.shape, idx)
    return apply_multiplier(arr, mult)


def riesz_feature_stack(data: np.ndarray) -> np.ndarray:
    """All first/second-order transforms of a d-dim array, stacked on axis 0.

    One forward FFT is shared across the feature multipliers.
    """
    d = data.ndim
    if d not in FEATURE_INDICES:
        raise VolumeError(f"unsupported dimension {d}")
    spectrum = _fft.fftn(data)
    feats = np.empty((feature_count(d),) + data.shape, dtype=data.dtype)
    for m, idx in enumerate(FEATURE_INDICES[d]):
        feats[m] = _fft.ifftn(multiplier(data.shape, idx) * spectrum).real
    return feats


def riesz_feature_adjoint(cotangents: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`riesz_feature_stack`: maps feature cotangents back.

    Applies the conjugate multiplier of each feature and sums, using a single
    inverse FFT.
    """
    d = cotangents.ndim - 1
    shape = cotangents.shape[1:]
    acc = np.zeros(shape, dtype=np.complex128 if cotangents.dtype == np.float64
                   else np.complex64)
    for m, idx in enumerate(FEATURE_INDICES[d]):
        acc += np.conj(multiplier(shape, idx)) * _fft.fftn(cotangents[m])
    return _fft.ifftn(acc).real.astype(cotangents.dtype, copy=False)
