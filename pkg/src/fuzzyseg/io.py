"""Binary raster/checkpoint formats and PNG helpers.

FZM1 layout (all little-endian)::

    bytes 0-3    magic b"FZM1"
    bytes 4-15   height, width, channels as uint32
    bytes 16-    float32 values, row-major, channels interleaved (H, W, C)

UNC1 checkpoint layout (all little-endian)::

    bytes 0-3    magic b"UNC1"
    uint32       length L of the config JSON
    L bytes      UTF-8 JSON object of UNetConfig fields (sorted keys)
    uint32       number of tensors N
    N times:
      uint16     length of the tensor name
      bytes      UTF-8 tensor name
      uint8      ndim
      ndim x uint32  shape
      float32 x prod(shape)  values, C order
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

FZM_MAGIC = b"FZM1"
CKPT_MAGIC = b"UNC1"


class FormatError(ValueError):
    """Raised when a file does not match its declared binary layout."""


def write_fzm(path: str | Path, raster: np.ndarray) -> None:
    raster = np.asarray(raster)
    if raster.ndim == 2:
        raster = raster[..., None]
    if raster.ndim != 3:
        raise ValueError(f"FZM1 holds 2D or 3D rasters, got shape {raster.shape}")
    h, w, c = raster.shape
    body = np.ascontiguousarray(raster, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(FZM_MAGIC + struct.pack("<3I", h, w, c) + body)


def read_fzm(path: str | Path, squeeze: bool = True) -> np.ndarray:
    """Read an FZM1 file as float32 ``(H, W, C)``; single-channel rasters come back 2D when ``squeeze``."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != FZM_MAGIC:
        raise FormatError(f"{path}: not an FZM1 file")
    h, w, c = struct.unpack("<3I", data[4:16])
    expected = 16 + 4 * h * w * c
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=16).reshape(h, w, c).astype(np.float32)
    if squeeze and c == 1:
        arr = arr[..., 0]
    return arr


def write_checkpoint(path: str | Path, config: dict, params: dict[str, np.ndarray]) -> None:
    cfg = json.dumps(config, sort_keys=True).encode("utf-8")
    parts = [CKPT_MAGIC, struct.pack("<I", len(cfg)), cfg, struct.pack("<I", len(params))]
    for name, value in params.items():
        value = np.asarray(value)
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", value.ndim) + struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    """Return ``(config_dict, {name: float64 array})`` from a UNC1 file."""
    data = Path(path).read_bytes()
    try:
        if data[:4] != CKPT_MAGIC:
            raise FormatError(f"{path}: not a UNC1 checkpoint")
        pos = 4
        (cfg_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        config = json.loads(data[pos:pos + cfg_len].decode("utf-8"))
        pos += cfg_len
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}I", data, pos)
            pos += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 4 * size > len(data):
                raise FormatError(f"{path}: truncated tensor {name!r}")
            arr = np.frombuffer(data, dtype="<f4", count=size, offset=pos)
            params[name] = arr.reshape(shape).astype(np.float64)
            pos += 4 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt checkpoint ({exc})") from exc
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes")
    return config, params


def write_mask_png(path: str | Path, mask: np.ndarray, num_classes: int = 2) -> None:
    """8-bit grayscale; class k is stored as ``255 * k / (num_classes - 1)``."""
    mask = np.asarray(mask)
    scaled = np.round(mask.astype(np.float64) * 255.0 / (num_classes - 1)).astype(np.uint8)
    Image.fromarray(scaled).save(path)


def read_mask_png(path: str | Path, num_classes: int = 2) -> np.ndarray:
    img = np.asarray(Image.open(path).convert("L"), dtype=np.float64)
    return np.round(img * (num_classes - 1) / 255.0).astype(np.uint8)


def write_heatmap_png(path: str | Path, prob: np.ndarray) -> None:
    values = np.round(np.clip(prob, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(values).save(path)


def read_rgb(path: str | Path) -> np.ndarray:
    """Load an image as float64 ``(H, W, 3)`` scaled to [0, 1]."""
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def write_rgb(path: str | Path, image: np.ndarray) -> None:
    values = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(values).save(path)
