import struct

import numpy as np
import pytest
from PIL import Image

from fuzzyseg import io


def test_fzm_header_layout(tmp_path):
    path = tmp_path / "a.fzm"
    raster = np.arange(6, dtype=np.float32).reshape(2, 3)
    io.write_fzm(path, raster)
    data = path.read_bytes()
    assert data[:4] == b"FZM1"
    assert struct.unpack("<3I", data[4:16]) == (2, 3, 1)
    assert len(data) == 16 + 4 * 6
    assert struct.unpack("<f", data[16 + 4 * 5:])[0] == 5.0


def test_fzm_channel_interleaving(tmp_path):
    path = tmp_path / "a.fzm"
    raster = np.zeros((1, 2, 2), np.float32)
    raster[0, 1, 0] = 7.0
    io.write_fzm(path, raster)
    values = struct.unpack("<4f", path.read_bytes()[16:])
    assert values == (0.0, 0.0, 7.0, 0.0)


@pytest.mark.parametrize("shape", [(5, 7), (4, 3, 2)])
def test_fzm_round_trip(tmp_path, shape):
    raster = np.random.default_rng(0).random(shape).astype(np.float32)
    io.write_fzm(tmp_path / "a.fzm", raster)
    np.testing.assert_array_equal(io.read_fzm(tmp_path / "a.fzm"), raster)


def test_fzm_rejects_corrupt(tmp_path):
    path = tmp_path / "a.fzm"
    io.write_fzm(path, np.zeros((3, 3), np.float32))
    path.write_bytes(path.read_bytes()[:-2])
    with pytest.raises(io.FormatError):
        io.read_fzm(path)
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(io.FormatError):
        io.read_fzm(path)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    params = {"a.w": rng.normal(size=(2, 3, 3, 3)).astype(np.float32).astype(np.float64),
              "a.b": np.zeros(2), "héad": np.ones((1, 1, 1, 1))}
    config = {"depth": 1, "head": "softmax"}
    io.write_checkpoint(tmp_path / "m.unc", config, params)
    cfg, back = io.read_checkpoint(tmp_path / "m.unc")
    assert cfg == config
    assert list(back) == list(params)
    for k in params:
        np.testing.assert_array_equal(back[k], params[k])


def test_checkpoint_rejects_truncation(tmp_path):
    io.write_checkpoint(tmp_path / "m.unc", {}, {"w": np.ones(10)})
    data = (tmp_path / "m.unc").read_bytes()
    for cut in (3, 10, len(data) - 1):
        (tmp_path / "bad.unc").write_bytes(data[:cut])
        with pytest.raises(io.FormatError):
            io.read_checkpoint(tmp_path / "bad.unc")
    (tmp_path / "bad.unc").write_bytes(data + b"x")
    with pytest.raises(io.FormatError):
        io.read_checkpoint(tmp_path / "bad.unc")


def test_mask_png_round_trip(tmp_path):
    mask = (np.random.default_rng(0).random((9, 11)) > 0.5).astype(np.uint8)
    io.write_mask_png(tmp_path / "m.png", mask)
    assert set(np.unique(np.asarray(Image.open(tmp_path / "m.png")))) <= {0, 255}
    np.testing.assert_array_equal(io.read_mask_png(tmp_path / "m.png"), mask)


def test_multiclass_mask_png(tmp_path):
    mask = np.array([[0, 1, 2, 3]], np.uint8)
    io.write_mask_png(tmp_path / "m.png", mask, num_classes=4)
    np.testing.assert_array_equal(io.read_mask_png(tmp_path / "m.png", 4), mask)
