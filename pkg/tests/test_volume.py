import json

import numpy as np
import pytest

from crackforge.errors import VolumeError
from crackforge.volume import (BinaryMask, VoxelVolume, load_mask, load_volume,
                               normalize_gray, save_mask, save_volume)


def test_zero_volume_round_trip(tmp_path):
    vol = VoxelVolume(np.zeros((4, 4, 4), dtype=np.float32), spacing_um=2.5)
    save_volume(vol, tmp_path / "zeros")
    back = load_volume(tmp_path / "zeros.raw")
    assert back.dims == (4, 4, 4)
    assert back.spacing_um == 2.5
    assert np.all(back.data == 0)


@pytest.mark.parametrize("dtype,maker", [
    ("f32", lambda rng: rng.random((5, 6, 7)).astype(np.float32)),
    ("u8", lambda rng: rng.integers(0, 256, (5, 6, 7)).astype(np.uint8)),
    ("u16", lambda rng: rng.integers(0, 65536, (5, 6, 7)).astype(np.uint16)),
])
def test_round_trip_bit_exact(tmp_path, dtype, maker):
    rng = np.random.default_rng(3)
    data = maker(rng)
    save_volume(VoxelVolume(data, spacing_um=23.5), tmp_path / "v", dtype=dtype)
    back = load_volume(tmp_path / "v")
    assert back.data.dtype == data.dtype
    assert np.array_equal(back.data, data)
    assert back.spacing_um == 23.5


def test_sidecar_contents(tmp_path):
    save_volume(VoxelVolume(np.zeros((2, 3, 4), dtype=np.float32), 1.5),
                tmp_path / "v")
    meta = json.loads((tmp_path / "v.json").read_text())
    assert meta == {"dims": [2, 3, 4], "dtype": "f32", "spacing_um": 1.5,
                    "order": "zyx"}


def test_file_is_z_major(tmp_path):
    data = np.arange(2 * 3 * 4, dtype=np.float32).reshape(2, 3, 4)
    save_volume(VoxelVolume(data), tmp_path / "v")
    flat = np.fromfile(tmp_path / "v.raw", dtype="<f4")
    # z-major, x fastest: element (x, y, z) sits at ((z * ny) + y) * nx + x
    assert flat[0] == data[0, 0, 0]
    assert flat[1] == data[1, 0, 0]
    assert flat[2] == data[0, 1, 0]
    assert flat[2 * 3] == data[0, 0, 1]


def test_size_mismatch_error(tmp_path):
    (tmp_path / "bad.raw").write_bytes(b"\x00" * 7 * 4)
    (tmp_path / "bad.json").write_text(json.dumps(
        {"dims": [2, 2, 2], "dtype": "f32", "spacing_um": 1.0, "order": "zyx"}))
    with pytest.raises(VolumeError, match="size mismatch"):
        load_volume(tmp_path / "bad")


def test_missing_sidecar_error(tmp_path):
    (tmp_path / "nometa.raw").write_bytes(b"\x00" * 8)
    with pytest.raises(VolumeError, match="sidecar"):
        load_volume(tmp_path / "nometa.raw")


def test_unsupported_dtype_error(tmp_path):
    (tmp_path / "v.raw").write_bytes(b"\x00" * 8)
    (tmp_path / "v.json").write_text(json.dumps(
        {"dims": [1, 1, 1], "dtype": "f64", "spacing_um": 1.0}))
    with pytest.raises(VolumeError, match="unsupported dtype"):
        load_volume(tmp_path / "v")


def test_mask_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    mask = BinaryMask(rng.random((4, 5, 6)) < 0.3)
    save_mask(mask, tmp_path / "m")
    back = load_mask(tmp_path / "m")
    assert np.array_equal(back.bits, mask.bits)
    raw = np.fromfile(tmp_path / "m.raw", dtype=np.uint8)
    assert set(np.unique(raw)) <= {0, 1}


def test_mask_rejects_other_values():
    with pytest.raises(VolumeError, match="0 or 1"):
        BinaryMask(np.array([[[0, 2]]], dtype=np.uint8))


def test_volume_rejects_nan():
    data = np.zeros((2, 2, 2))
    data[0, 0, 0] = np.nan
    with pytest.raises(VolumeError, match="NaN"):
        VoxelVolume(data)


def test_normalize_gray_spanning_input_unchanged():
    rng = np.random.default_rng(1)
    data = rng.random((20, 20, 20))
    data.flat[0], data.flat[1] = 0.0, 1.0
    out = normalize_gray(VoxelVolume(data), q_low=0.0, q_high=1.0)
    assert np.allclose(out.data, data)


def test_normalize_gray_affine_invariant():
    rng = np.random.default_rng(2)
    data = rng.random((16, 16, 16))
    a = normalize_gray(VoxelVolume(data))
    b = normalize_gray(VoxelVolume(2.0 * data + 5.0))
    assert np.allclose(a.data, b.data, atol=1e-12)


def test_normalize_gray_constant_errors():
    with pytest.raises(VolumeError, match="degenerate range"):
        normalize_gray(VoxelVolume(np.full((4, 4, 4), 0.7)))


def test_normalize_gray_output_in_unit_interval():
    rng = np.random.default_rng(3)
    out = normalize_gray(VoxelVolume(rng.normal(size=(16, 16, 16))))
    assert out.data.min() >= 0.0 and out.data.max() <= 1.0
