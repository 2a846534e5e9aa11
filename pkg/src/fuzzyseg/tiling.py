"""Fixed-size patch extraction and overlap-averaging reassembly."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TileGrid:
    patch: int
    stride: int | None = None
    pad_policy: str = "reflect"

    def __post_init__(self):
        if self.stride is None:
            object.__setattr__(self, "stride", self.patch)
        if self.patch <= 0:
            raise ValueError(f"patch must be positive, got {self.patch}")
        if not 0 < self.stride <= self.patch:
            raise ValueError(f"stride must be in (0, patch], got {self.stride}")
        if self.pad_policy not in ("zero", "reflect"):
            raise ValueError(f"unknown pad policy {self.pad_policy!r}")

    def count(self, dim: int) -> int:
        """Number of patch positions along an axis of length ``dim``."""
        return math.ceil(max(dim - self.patch, 0) / self.stride) + 1

    def padded_size(self, dim: int) -> int:
        return self.patch + (self.count(dim) - 1) * self.stride


def extract_patches(raster: np.ndarray, grid: TileGrid) -> list[tuple[np.ndarray, int, int]]:
    """Cut ``raster`` (H, W[, C]) into ``grid.patch``-sided tiles.

    The raster is first padded on the bottom/right so the tiles cover it
    exactly; returned offsets refer to that padded frame.
    """
    raster = np.asarray(raster)
    if raster.ndim not in (2, 3) or raster.shape[0] == 0 or raster.shape[1] == 0:
        raise ValueError(f"expected a nonempty 2D/3D raster, got shape {raster.shape}")
    h, w = raster.shape[:2]
    ph, pw = grid.padded_size(h), grid.padded_size(w)
    pad = [(0, ph - h), (0, pw - w)] + [(0, 0)] * (raster.ndim - 2)
    if ph != h or pw != w:
        if grid.pad_policy == "zero":
            raster = np.pad(raster, pad, mode="constant")
        else:
            raster = np.pad(raster, pad, mode="reflect" if min(h, w) > 1 else "edge")
    out = []
    for i in range(grid.count(h)):
        for j in range(grid.count(w)):
            r, c = i * grid.stride, j * grid.stride
            out.append((raster[r:r + grid.patch, c:c + grid.patch].copy(), r, c))
    return out


def stitch(patches: list[tuple[np.ndarray, int, int]], height: int, width: int,
           stride: int, patch: int) -> np.ndarray:
    """Reassemble tiles, averaging overlaps with equal weight, cropped to (height, width)."""
    if not patches:
        raise ValueError("no patches to stitch")
    first = np.asarray(patches[0][0])
    extra = first.shape[2:]
    max_r = max(r for _, r, _ in patches) + patch
    max_c = max(c for _, _, c in patches) + patch
    acc = np.zeros((max(max_r, height), max(max_c, width)) + extra, dtype=np.float64)
    hits = np.zeros(acc.shape[:2], dtype=np.int64)
    for tile, r, c in patches:
        tile = np.asarray(tile)
        if tile.shape != (patch, patch) + extra:
            raise ValueError(f"inconsistent patch shape {tile.shape}")
        if r % stride or c % stride or r < 0 or c < 0:
            raise ValueError(f"offset ({r}, {c}) is not on the stride-{stride} lattice")
        acc[r:r + patch, c:c + patch] += tile
        hits[r:r + patch, c:c + patch] += 1
    hits = hits[:height, :width]
    if (hits == 0).any():
        raise ValueError("patches do not cover the requested output")
    if (hits == 1).all():
        # no overlap: copy tiles verbatim so integer masks keep their dtype
        out = np.zeros((height, width) + extra, dtype=first.dtype)
        for tile, r, c in patches:
            rh, cw = min(patch, height - r), min(patch, width - c)
            if rh > 0 and cw > 0:
                out[r:r + rh, c:c + cw] = tile[:rh, :cw]
        return out
    return acc[:height, :width] / hits.reshape(hits.shape + (1,) * len(extra))
