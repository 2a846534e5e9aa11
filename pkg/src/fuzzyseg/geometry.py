"""World-coordinate plant annotations and their rasterization into hard masks.

Pixel convention: the raster is north-up, so row indices grow as world y
decreases.  A pixel belongs to an annotation when its *center* falls inside
the disc (distance <= diameter / 2) or inside the polygon outline (even-odd
rule).  All annotations map to class 1; species is kept on the record only.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ("id", "species_id", "center_x_m", "center_y_m", "diameter_m", "polygon")


@dataclass(frozen=True)
class GeoTransform:
    origin_x: float
    origin_y: float
    resolution: float

    def __post_init__(self):
        if not (math.isfinite(self.origin_x) and math.isfinite(self.origin_y)):
            raise ValueError("origin coordinates must be finite")
        if not (math.isfinite(self.resolution) and self.resolution > 0):
            raise ValueError(f"resolution must be positive, got {self.resolution}")

    def pixel_centers(self, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
        """World (x, y) of every pixel center, each of shape (height, width)."""
        cols = self.origin_x + (np.arange(width) + 0.5) * self.resolution
        rows = self.origin_y - (np.arange(height) + 0.5) * self.resolution
        xs, ys = np.meshgrid(cols, rows)
        return xs, ys


@dataclass(frozen=True)
class PlantAnnotation:
    id: str
    species_id: int
    center_x: float
    center_y: float
    diameter: float
    outline: tuple[tuple[float, float], ...] | None = field(default=None)

    def __post_init__(self):
        if self.species_id < 0:
            raise ValueError(f"species_id must be nonnegative, got {self.species_id}")
        if not (math.isfinite(self.diameter) and self.diameter >= 0):
            raise ValueError(f"diameter must be >= 0, got {self.diameter}")
        if not (math.isfinite(self.center_x) and math.isfinite(self.center_y)):
            raise ValueError("annotation center must be finite")
        if self.outline is not None:
            if len(self.outline) < 3:
                raise ValueError(
                    f"annotation {self.id!r}: outline needs >= 3 vertices, got {len(self.outline)}"
                )
            object.__setattr__(
                self, "outline", tuple((float(x), float(y)) for x, y in self.outline)
            )


def world_to_pixel(gt: GeoTransform, x: float, y: float) -> tuple[int, int]:
    """Return the (row, col) of the pixel containing world point (x, y).

    The result may fall outside the raster; callers clip.
    """
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError(f"non-finite world coordinate ({x}, {y})")
    col = _snapped_floor((x - gt.origin_x) / gt.resolution)
    row = _snapped_floor((gt.origin_y - y) / gt.resolution)
    return row, col


def _snapped_floor(v: float) -> int:
    # decimal resolutions make exact pixel edges land a few ulps short
    n = round(v)
    if abs(v - n) <= 1e-9 * max(1.0, abs(v)):
        return int(n)
    return math.floor(v)


def points_in_polygon(xs: np.ndarray, ys: np.ndarray,
                      vertices: Sequence[tuple[float, float]]) -> np.ndarray:
    """Even-odd containment test for arrays of points against one polygon."""
    inside = np.zeros(np.shape(xs), dtype=bool)
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > ys) != (y2 > ys)
        # the ratio lies in [0, 1] wherever the edge is crossed; elsewhere it is masked out
        with np.errstate(over="ignore", invalid="ignore"):
            x_at = x1 + (ys - y1) / (y2 - y1) * (x2 - x1)
        inside ^= crosses & (xs < x_at)
    return inside


def rasterize(annotations: Iterable[PlantAnnotation], gt: GeoTransform,
              height: int, width: int) -> np.ndarray:
    """Burn annotations into a binary uint8 mask of shape (height, width)."""
    if height <= 0 or width <= 0:
        raise ValueError(f"raster size must be positive, got {height}x{width}")
    mask = np.zeros((height, width), dtype=np.uint8)
    xs, ys = gt.pixel_centers(height, width)
    for ann in annotations:
        if ann.outline is not None:
            mask[points_in_polygon(xs, ys, ann.outline)] = 1
        r = ann.diameter / 2.0
        # restrict the distance test to the disc's bounding window
        r0, c0 = world_to_pixel(gt, ann.center_x - r, ann.center_y + r)
        r1, c1 = world_to_pixel(gt, ann.center_x + r, ann.center_y - r)
        r0, c0 = max(r0 - 1, 0), max(c0 - 1, 0)
        r1, c1 = min(r1 + 2, height), min(c1 + 2, width)
        if r0 >= r1 or c0 >= c1:
            continue
        dx = xs[r0:r1, c0:c1] - ann.center_x
        dy = ys[r0:r1, c0:c1] - ann.center_y
        mask[r0:r1, c0:c1][dx * dx + dy * dy <= r * r] = 1
    return mask


def _parse_polygon(text: str) -> tuple[tuple[float, float], ...] | None:
    text = text.strip()
    if not text:
        return None
    vertices = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 2:
            raise ValueError(f"bad polygon vertex {chunk!r}")
        vertices.append((float(parts[0]), float(parts[1])))
    return tuple(vertices)


def read_annotations_csv(path: str | Path) -> list[PlantAnnotation]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(PlantAnnotation(
                    id=row["id"],
                    species_id=int(row["species_id"]),
                    center_x=float(row["center_x_m"]),
                    center_y=float(row["center_y_m"]),
                    diameter=float(row["diameter_m"]),
                    outline=_parse_polygon(row["polygon"] or ""),
                ))
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
    return out


def write_annotations_csv(path: str | Path, annotations: Iterable[PlantAnnotation]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for ann in annotations:
            poly = ""
            if ann.outline is not None:
                poly = ";".join(f"{x!r} {y!r}" for x, y in ann.outline)
            writer.writerow([ann.id, ann.species_id, repr(float(ann.center_x)),
                             repr(float(ann.center_y)), repr(float(ann.diameter)), poly])
