"""Dense voxel volumes and binary masks, with raw + JSON-sidecar file I/O.

A volume on disk is a pair ``<name>.raw`` / ``<name>.json``.  The raw file
holds the samples little-endian in z-major order (x fastest); the sidecar
records dims, dtype, spacing and the sample order::

    {"dims": [nx, ny, nz], "dtype": "f32", "spacing_um": 23.5, "order": "zyx"}

In memory the data lives in an ``(nx, ny, nz)`` array (axis 0 is x, axis 2
is z, the vertical).  A volume with ``nz == 1`` is treated as a 2D image by
every dimension-generic operation in the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import VolumeError

_DTYPES = {
    "f32": np.dtype("<f4"),
    "u8": np.dtype("u1"),
    "u16": np.dtype("<u2"),
}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.uint8): "u8",
                np.dtype(np.uint16): "u16", np.dtype(np.float64): "f32"}


@dataclass(frozen=True)
class VoxelVolume:
    """A dense 3D scalar grid with isotropic voxel spacing in micrometers."""

    data: np.ndarray
    spacing_um: float = 1.0

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3:
            raise VolumeError(f"volume data must have 3 axes, got {data.ndim}")
        if min(data.shape) < 1:
            raise VolumeError(f"empty volume dims {data.shape}")
        if not float(self.spacing_um) > 0:
            raise VolumeError(f"spacing_um must be > 0, got {self.spacing_um}")
        if np.issubdtype(data.dtype, np.floating) and not np.all(np.isfinite(data)):
            raise VolumeError("volume contains NaN or Inf")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "spacing_um", float(self.spacing_um))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def ndim_spatial(self) -> int:
        """2 for single-slice (nz == 1) images, else 3."""
        return 2 if self.data.shape[2] == 1 else 3

    def astype(self, dtype) -> "VoxelVolume":
        return VoxelVolume(self.data.astype(dtype), self.spacing_um)


@dataclass(frozen=True)
class BinaryMask:
    """Per-voxel foreground labels; 1 marks crack voxels."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim == 2:
            bits = bits[:, :, None]
        if bits.ndim != 3:
            raise VolumeError(f"mask must have 3 axes, got {bits.ndim}")
        if bits.dtype != np.bool_:
            vals = np.unique(bits)
            if not np.isin(vals, (0, 1)).all():
                raise VolumeError("mask values must be 0 or 1")
            bits = bits.astype(bool)
        object.__setattr__(self, "bits", bits)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix == ".raw":
        stem = p.with_suffix("")
    elif p.suffix == ".json":
        stem = p.with_suffix("")
    else:
        stem = p
    return stem.with_suffix(".raw"), stem.with_suffix(".json")


def load_volume(path) -> VoxelVolume:
    """Load a raw volume, taking dims/dtype/spacing from the JSON sidecar."""
    raw_path, sidecar_path = _paths(path)
    if not sidecar_path.exists():
        raise VolumeError(f"missing sidecar {sidecar_path}")
    if not raw_path.exists():
        raise VolumeError(f"missing raw file {raw_path}")
    try:
        meta = json.loads(sidecar_path.read_text())
        dims = tuple(int(n) for n in meta["dims"])
        dtype_name = meta["dtype"]
        spacing = float(meta.get("spacing_um", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise VolumeError(f"malformed sidecar {sidecar_path}: {exc}") from exc
    if len(dims) != 3 or min(dims) < 1:
        raise VolumeError(f"bad dims {dims} in {sidecar_path}")
    if dtype_name not in _DTYPES:
        raise VolumeError(f"unsupported dtype {dtype_name!r} in {sidecar_path}")
    if meta.get("order", "zyx") != "zyx":
        raise VolumeError(f"unsupported sample order {meta.get('order')!r}")
    dtype = _DTYPES[dtype_name]
    nx, ny, nz = dims
    expected = nx * ny * nz * dtype.itemsize
    actual = raw_path.stat().st_size
    if expected != actual:
        raise VolumeError(
            f"size mismatch for {raw_path}: dims {dims} x {dtype_name} "
            f"needs {expected} bytes, file has {actual}")
    flat = np.fromfile(raw_path, dtype=dtype)
    data = flat.reshape(nz, ny, nx).transpose(2, 1, 0)
    return VoxelVolume(data, spacing_um=spacing)


def save_volume(volume: VoxelVolume, path, dtype: str | None = None) -> None:
    """Write raw + sidecar so that :func:`load_volume` inverts it bit-exactly."""
    raw_path, sidecar_path = _paths(path)
    if dtype is None:
        key = np.dtype(volume.data.dtype)
        dtype = _DTYPE_NAMES.get(key)
        if dtype is None:
            raise VolumeError(f"cannot infer file dtype from {key}")
    if dtype not in _DTYPES:
        raise VolumeError(f"unsupported dtype {dtype!r}")
    out = np.ascontiguousarray(
        volume.data.transpose(2, 1, 0).astype(_DTYPES[dtype], copy=False))
    meta = {
        "dims": list(volume.dims),
        "dtype": dtype,
        "spacing_um": volume.spacing_um,
        "order": "zyx",
    }
    raw_path.parent.mkdir(parents=True, exist_ok=True)
    out.tofile(raw_path)
    sidecar_path.write_text(json.dumps(meta) + "\n")


def load_mask(path) -> BinaryMask:
    """Load a u8 {0,1} volume as a mask."""
    vol = load_volume(path)
    return BinaryMask(vol.data)


def save_mask(mask: BinaryMask, path, spacing_um: float = 1.0) -> None:
    save_volume(VoxelVolume(mask.bits.astype(np.uint8), spacing_um), path, dtype="u8")


def normalize_gray(volume: VoxelVolume, q_low: float = 0.001,
                   q_high: float = 0.999) -> VoxelVolume:
    """Affinely map the [q_low, q_high] quantile range onto [0, 1] and clip.

    Invariant under positive affine transforms of the input.  Raises for a
    constant volume, where the two quantiles coincide.
    """
    if not 0.0 <= q_low < q_high <= 1.0:
        raise VolumeError(f"bad quantile pair ({q_low}, {q_high})")
    data = volume.data.astype(np.float64, copy=False)
    lo, hi = np.quantile(data, [q_low, q_high])
    if hi <= lo:
        raise VolumeError("degenerate range: quantiles coincide")
    out = np.clip((data - lo) / (hi - lo), 0.0, 1.0)
    return VoxelVolume(out, volume.spacing_um)
